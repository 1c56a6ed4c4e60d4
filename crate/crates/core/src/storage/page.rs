//! Fixed-size page layout for column files.
//!
//! Every page is exactly `PAGE_SIZE` bytes: a 24-byte header followed by
//! `row_count` contiguous fixed-width values, zero padding after them.
//! All integers little-endian.

use crate::{EngineError, Result};

pub const PAGE_SIZE: usize = 4096;
pub const PAGE_HEADER_LEN: usize = 24;
pub const PAGE_MAGIC: [u8; 4] = *b"HMCF";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageHeader {
    pub table_id: u32,
    pub column_id: u32,
    pub first_row: u64,
    pub row_count: u32,
}

impl PageHeader {
    pub fn encode(&self, out: &mut [u8]) {
        out[0..4].copy_from_slice(&PAGE_MAGIC);
        out[4..8].copy_from_slice(&self.table_id.to_le_bytes());
        out[8..12].copy_from_slice(&self.column_id.to_le_bytes());
        out[12..20].copy_from_slice(&self.first_row.to_le_bytes());
        out[20..24].copy_from_slice(&self.row_count.to_le_bytes());
    }

    pub fn decode(buf: &[u8], context: &str) -> Result<PageHeader> {
        if buf.len() < PAGE_HEADER_LEN {
            return Err(EngineError::Catalog(format!(
                "{context}: page shorter than its header"
            )));
        }
        if buf[0..4] != PAGE_MAGIC {
            return Err(EngineError::Catalog(format!(
                "{context}: bad page magic {:02x?}",
                &buf[0..4]
            )));
        }
        Ok(PageHeader {
            table_id: u32::from_le_bytes(buf[4..8].try_into().unwrap()),
            column_id: u32::from_le_bytes(buf[8..12].try_into().unwrap()),
            first_row: u64::from_le_bytes(buf[12..20].try_into().unwrap()),
            row_count: u32::from_le_bytes(buf[20..24].try_into().unwrap()),
        })
    }
}

/// Values of `width` bytes that fit in one page payload.
pub fn rows_per_page(width: u32) -> u64 {
    ((PAGE_SIZE - PAGE_HEADER_LEN) as u64) / width as u64
}

pub fn page_of(pos: u64, rows_per_page: u64) -> u64 {
    debug_assert!(rows_per_page > 0);
    pos / rows_per_page
}

pub fn page_count(row_count: u64, rows_per_page: u64) -> u64 {
    row_count.div_ceil(rows_per_page)
}
