//! Column readers on top of the buffer pool: a block-sized sequential scan
//! and the positional read primitive that the materializing operators use.

use hmdb_ir::{Value, ValueType};

use super::catalog::ColumnMeta;
use super::page::{page_of, PAGE_HEADER_LEN};
use super::pool::BufferPool;
use crate::{EngineError, Result};

pub fn decode_value(bytes: &[u8], vtype: ValueType) -> Value {
    match vtype {
        ValueType::Int64 | ValueType::Decimal2 => {
            Value::Int(i64::from_le_bytes(bytes.try_into().unwrap()))
        }
        ValueType::Char(_) => {
            // Stored space-padded; the padding is not part of the value.
            let s = std::str::from_utf8(bytes).unwrap_or("").trim_end_matches(' ');
            Value::Str(s.to_string())
        }
    }
}

fn value_at(page: &[u8], col: &ColumnMeta, pos: u64) -> Value {
    let rpp = col.rows_per_page();
    let slot = (pos % rpp) as usize;
    let w = col.width as usize;
    let start = PAGE_HEADER_LEN + slot * w;
    decode_value(&page[start..start + w], col.vtype)
}

/// Sequential scan yielding `block_rows`-sized value chunks in position
/// order. Touches each page once per chunk boundary crossing; with any
/// reasonable pool those re-touches are hits.
pub struct ColumnScan<'a> {
    pool: &'a BufferPool,
    col: ColumnMeta,
    next_row: u64,
    block_rows: u64,
}

impl<'a> ColumnScan<'a> {
    pub fn new(pool: &'a BufferPool, col: &ColumnMeta, block_rows: usize) -> ColumnScan<'a> {
        assert!(block_rows > 0);
        ColumnScan {
            pool,
            col: col.clone(),
            next_row: 0,
            block_rows: block_rows as u64,
        }
    }

    pub fn next_chunk(&mut self) -> Result<Option<Vec<Value>>> {
        if self.next_row >= self.col.row_count {
            return Ok(None);
        }
        let start = self.next_row;
        let end = (start + self.block_rows).min(self.col.row_count);
        self.next_row = end;
        let mut out = Vec::with_capacity((end - start) as usize);
        let rpp = self.col.rows_per_page();
        let mut pos = start;
        while pos < end {
            let page_idx = page_of(pos, rpp);
            let page = self.pool.fetch_page(&self.col, page_idx)?;
            let page_end = ((page_idx + 1) * rpp).min(end);
            while pos < page_end {
                out.push(value_at(&page, &self.col, pos));
                pos += 1;
            }
        }
        Ok(Some(out))
    }
}

/// Read a column at explicit positions, returning values in position-list
/// order. Page access order follows the positions as given, so dense
/// ascending lists read sequentially and shuffled lists read randomly;
/// with `sort_probe` the distinct pages are visited in ascending order
/// instead (the output order is unchanged).
pub fn read_at_positions(
    pool: &BufferPool,
    col: &ColumnMeta,
    positions: &[u64],
    sort_probe: bool,
) -> Result<Vec<Value>> {
    for &p in positions {
        if p >= col.row_count {
            return Err(EngineError::Exec(format!(
                "position {p} out of range for {} ({} rows)",
                col.qualified(),
                col.row_count
            )));
        }
    }
    let rpp = col.rows_per_page();
    let mut out: Vec<Value> = Vec::with_capacity(positions.len());
    if !sort_probe {
        for &p in positions {
            let page = pool.fetch_page(col, page_of(p, rpp))?;
            out.push(value_at(&page, col, p));
        }
        return Ok(out);
    }

    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by_key(|&i| positions[i]);
    out.resize(positions.len(), Value::Int(0));
    for i in order {
        let p = positions[i];
        let page = pool.fetch_page(col, page_of(p, rpp))?;
        out[i] = value_at(&page, col, p);
    }
    Ok(out)
}
