//! Bulk loader: writes column files page by page and the catalog descriptor.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hmdb_ir::ValueType;

use super::catalog::CATALOG_FILE;
use super::page::{PageHeader, PAGE_HEADER_LEN, PAGE_SIZE};
use crate::{EngineError, Result};

pub enum ColumnVals {
    Ints(Vec<i64>),
    Strs(Vec<String>),
}

impl ColumnVals {
    pub fn len(&self) -> usize {
        match self {
            ColumnVals::Ints(v) => v.len(),
            ColumnVals::Strs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct DatasetWriter {
    dir: PathBuf,
    lines: Vec<String>,
    table_ids: BTreeMap<String, u32>,
    next_col_id: BTreeMap<String, u32>,
    table_rows: BTreeMap<String, u64>,
}

impl DatasetWriter {
    pub fn new(dir: &Path) -> Result<DatasetWriter> {
        fs::create_dir_all(dir).map_err(|e| EngineError::io(dir, e))?;
        Ok(DatasetWriter {
            dir: dir.to_path_buf(),
            lines: Vec::new(),
            table_ids: BTreeMap::new(),
            next_col_id: BTreeMap::new(),
            table_rows: BTreeMap::new(),
        })
    }

    pub fn write_column(
        &mut self,
        table: &str,
        column: &str,
        vtype: ValueType,
        vals: &ColumnVals,
    ) -> Result<()> {
        let row_count = vals.len() as u64;
        match self.table_rows.get(table) {
            Some(&n) if n != row_count => {
                return Err(EngineError::Catalog(format!(
                    "{table}.{column}: {row_count} rows but table already has columns with {n}"
                )));
            }
            Some(_) => {}
            None => {
                self.table_rows.insert(table.to_string(), row_count);
            }
        }
        let next_table_id = self.table_ids.len() as u32;
        let table_id = *self
            .table_ids
            .entry(table.to_string())
            .or_insert(next_table_id);
        let col_id_slot = self.next_col_id.entry(table.to_string()).or_insert(0);
        let column_id = *col_id_slot;
        *col_id_slot += 1;

        let width = vtype.width() as usize;
        let rpp = super::page::rows_per_page(vtype.width());
        let file_name = format!("{table}.{column}.col");
        let path = self.dir.join(&file_name);
        let mut out = fs::File::create(&path).map_err(|e| EngineError::io(&path, e))?;

        let mut page = vec![0u8; PAGE_SIZE];
        let mut first_row = 0u64;
        while first_row < row_count {
            let in_page = (row_count - first_row).min(rpp) as usize;
            page.fill(0);
            PageHeader {
                table_id,
                column_id,
                first_row,
                row_count: in_page as u32,
            }
            .encode(&mut page[..PAGE_HEADER_LEN]);
            for i in 0..in_page {
                let row = first_row as usize + i;
                let slot = &mut page[PAGE_HEADER_LEN + i * width..PAGE_HEADER_LEN + (i + 1) * width];
                match vals {
                    ColumnVals::Ints(v) => slot.copy_from_slice(&v[row].to_le_bytes()),
                    ColumnVals::Strs(v) => {
                        let b = v[row].as_bytes();
                        if b.len() > width {
                            return Err(EngineError::Catalog(format!(
                                "{table}.{column} row {row}: value longer than {vtype}"
                            )));
                        }
                        slot[..b.len()].copy_from_slice(b);
                        slot[b.len()..].fill(b' ');
                    }
                }
            }
            out.write_all(&page).map_err(|e| EngineError::io(&path, e))?;
            first_row += in_page as u64;
        }

        self.lines.push(format!(
            "{table}\t{column}\t{vtype}\t{}\t{row_count}\t{file_name}",
            vtype.width()
        ));
        Ok(())
    }

    /// Write the descriptor. The writer is consumed; the directory is now a
    /// complete dataset.
    pub fn finish(self) -> Result<()> {
        let path = self.dir.join(CATALOG_FILE);
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| EngineError::io(&path, e))
    }
}
