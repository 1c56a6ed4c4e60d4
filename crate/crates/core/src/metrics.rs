//! Query metrics assembled from buffer pool counter deltas and per-operator
//! output counts. Page and row counters are deterministic for a given plan,
//! data, and pool size; wall time is reported but never part of any
//! comparison logic.

use std::collections::BTreeMap;
use std::fmt;

use crate::exec::{ExecCtx, OpStats};
use crate::storage::PAGE_SIZE;
use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ColumnIo {
    pub pages_seq: u64,
    pub pages_rand: u64,
    pub hits: u64,
    pub evictions: u64,
}

impl ColumnIo {
    pub fn pages_read(&self) -> u64 {
        self.pages_seq + self.pages_rand
    }

    pub fn bytes_read(&self) -> u64 {
        self.pages_read() * PAGE_SIZE as u64
    }
}

#[derive(Debug, Clone)]
pub struct QueryMetrics {
    /// Per-column I/O, keyed by "table.column". Columns the query never
    /// touched are absent.
    pub columns: BTreeMap<String, ColumnIo>,
    pub ops: Vec<OpStats>,
    pub rows_pushed_total: u64,
    pub hashtable_bytes_peak: u64,
    pub wall_ms: f64,
}

impl QueryMetrics {
    pub fn column(&self, qualified: &str) -> ColumnIo {
        self.columns.get(qualified).copied().unwrap_or_default()
    }

    pub fn pages_seq_total(&self) -> u64 {
        self.columns.values().map(|c| c.pages_seq).sum()
    }

    pub fn pages_rand_total(&self) -> u64 {
        self.columns.values().map(|c| c.pages_rand).sum()
    }

    pub fn pages_read_total(&self) -> u64 {
        self.pages_seq_total() + self.pages_rand_total()
    }

    pub fn bytes_read_total(&self) -> u64 {
        self.pages_read_total() * PAGE_SIZE as u64
    }
}

/// Collect the metrics of the last completed query on this context.
/// Taking a snapshot while a query is still running is an error: counters
/// would be mid-flight and not reproducible.
pub fn snapshot(ctx: &ExecCtx) -> Result<QueryMetrics> {
    if ctx.is_running() {
        return Err(EngineError::Exec(
            "metrics snapshot while a query is running".into(),
        ));
    }
    let mut columns = BTreeMap::new();
    let mut names: BTreeMap<(u32, u32), String> = BTreeMap::new();
    for col in ctx.catalog.columns() {
        names.insert((col.table_id, col.column_id), col.qualified());
    }
    for (key, c) in ctx.pool_delta() {
        if c.seq == 0 && c.rand == 0 && c.hits == 0 && c.evictions == 0 {
            continue;
        }
        let name = names
            .get(&key)
            .cloned()
            .unwrap_or_else(|| format!("column#{}.{}", key.0, key.1));
        columns.insert(
            name,
            ColumnIo {
                pages_seq: c.seq,
                pages_rand: c.rand,
                hits: c.hits,
                evictions: c.evictions,
            },
        );
    }
    let ops = ctx.op_stats();
    let rows_pushed_total = ops.iter().map(|o| o.rows_out).sum();
    Ok(QueryMetrics {
        columns,
        ops,
        rows_pushed_total,
        hashtable_bytes_peak: ctx.hashtable_bytes_peak(),
        wall_ms: ctx.wall_ms(),
    })
}

// ── Comparison ──

/// One metric from two runs side by side. The ratio is left over right and
/// is undefined (None) when the right value is zero.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    pub left: f64,
    pub right: f64,
}

impl Ratio {
    fn of(left: u64, right: u64) -> Ratio {
        Ratio {
            left: left as f64,
            right: right as f64,
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        if self.right == 0.0 {
            None
        } else {
            Some(self.left / self.right)
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio() {
            Some(r) => write!(f, "{} / {} = {r:.3}", self.left, self.right),
            None => write!(f, "{} / {} = undefined", self.left, self.right),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricsCompare {
    pub pages_seq: Ratio,
    pub pages_rand: Ratio,
    pub pages_read: Ratio,
    pub bytes_read: Ratio,
    pub rows_pushed: Ratio,
    pub hashtable_peak: Ratio,
    /// Per-column (seq, rand) for every column either run touched.
    pub columns: BTreeMap<String, (Ratio, Ratio)>,
}

pub fn compare(left: &QueryMetrics, right: &QueryMetrics) -> MetricsCompare {
    let mut columns = BTreeMap::new();
    for name in left.columns.keys().chain(right.columns.keys()) {
        let a = left.column(name);
        let b = right.column(name);
        columns.insert(
            name.clone(),
            (
                Ratio::of(a.pages_seq, b.pages_seq),
                Ratio::of(a.pages_rand, b.pages_rand),
            ),
        );
    }
    MetricsCompare {
        pages_seq: Ratio::of(left.pages_seq_total(), right.pages_seq_total()),
        pages_rand: Ratio::of(left.pages_rand_total(), right.pages_rand_total()),
        pages_read: Ratio::of(left.pages_read_total(), right.pages_read_total()),
        bytes_read: Ratio::of(left.bytes_read_total(), right.bytes_read_total()),
        rows_pushed: Ratio::of(left.rows_pushed_total, right.rows_pushed_total),
        hashtable_peak: Ratio::of(left.hashtable_bytes_peak, right.hashtable_bytes_peak),
        columns,
    }
}

impl fmt::Display for MetricsCompare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pages_seq       {}", self.pages_seq)?;
        writeln!(f, "pages_rand      {}", self.pages_rand)?;
        writeln!(f, "pages_read      {}", self.pages_read)?;
        writeln!(f, "bytes_read      {}", self.bytes_read)?;
        writeln!(f, "rows_pushed     {}", self.rows_pushed)?;
        writeln!(f, "hashtable_peak  {}", self.hashtable_peak)?;
        for (name, (seq, rand)) in &self.columns {
            writeln!(f, "  {name}: seq {seq}; rand {rand}")?;
        }
        Ok(())
    }
}
