//! Result rows and order-insensitive comparison.
//!
//! Queries here have no ORDER BY, so two result sets agree when they are
//! equal as multisets. Both sides are canonicalized (sorted) and compared
//! positionally; the first mismatch is reported for diagnostics.

use std::fmt;

use crate::value::Value;

pub type Row = Vec<Value>;

/// Sort rows into the canonical multiset order (`Value` has a total order).
pub fn canonicalize(rows: &mut [Row]) {
    rows.sort();
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSetDiff {
    pub left_rows: usize,
    pub right_rows: usize,
    /// Index into the canonical order plus the row each side has there;
    /// `None` on a side that ran out of rows.
    pub first_mismatch: Option<(usize, Option<Row>, Option<Row>)>,
}

fn render(row: &Option<Row>) -> String {
    match row {
        None => "<absent>".to_string(),
        Some(r) => {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            format!("[{}]", cells.join(", "))
        }
    }
}

impl fmt::Display for RowSetDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "row sets differ: {} vs {} rows",
            self.left_rows, self.right_rows
        )?;
        if let Some((i, l, r)) = &self.first_mismatch {
            write!(
                f,
                "; first mismatch at canonical index {i}: {} vs {}",
                render(l),
                render(r)
            )?;
        }
        Ok(())
    }
}

/// Compare two row multisets. Both inputs are canonicalized in place.
/// Returns `None` when they agree.
pub fn compare_multisets(left: &mut Vec<Row>, right: &mut Vec<Row>) -> Option<RowSetDiff> {
    canonicalize(left);
    canonicalize(right);
    let n = left.len().max(right.len());
    for i in 0..n {
        let (l, r) = (left.get(i), right.get(i));
        if l != r {
            return Some(RowSetDiff {
                left_rows: left.len(),
                right_rows: right.len(),
                first_mismatch: Some((i, l.cloned(), r.cloned())),
            });
        }
    }
    None
}
