//! Catalog descriptor: `catalog.tsv` plus one file per column.
//!
//! Descriptor line format, tab-separated:
//! `table<TAB>column<TAB>type<TAB>width<TAB>row_count<TAB>file`
//!
//! Table and column ids are assigned by appearance order in the descriptor
//! and must match the ids stamped into the column files' page headers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hmdb_ir::{SchemaProvider, ValueType};

use super::page::{page_count, rows_per_page, PageHeader, PAGE_HEADER_LEN, PAGE_SIZE};
use crate::{EngineError, Result};

pub const CATALOG_FILE: &str = "catalog.tsv";

#[derive(Debug, Clone)]
pub struct ColumnMeta {
    pub table: String,
    pub column: String,
    pub vtype: ValueType,
    pub width: u32,
    pub row_count: u64,
    pub path: PathBuf,
    pub table_id: u32,
    pub column_id: u32,
}

impl ColumnMeta {
    pub fn rows_per_page(&self) -> u64 {
        rows_per_page(self.width)
    }

    pub fn page_count(&self) -> u64 {
        page_count(self.row_count, self.rows_per_page())
    }

    pub fn qualified(&self) -> String {
        format!("{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone)]
pub struct TableMeta {
    pub name: String,
    pub row_count: u64,
    pub table_id: u32,
}

#[derive(Debug)]
pub struct Catalog {
    pub dir: PathBuf,
    tables: Vec<TableMeta>,
    columns: Vec<ColumnMeta>,
}

impl Catalog {
    pub fn tables(&self) -> &[TableMeta] {
        &self.tables
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn table(&self, name: &str) -> Option<&TableMeta> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnMeta> {
        self.columns
            .iter()
            .find(|c| c.table == table && c.column == column)
    }

    pub fn require_column(&self, table: &str, column: &str) -> Result<&ColumnMeta> {
        self.column(table, column).ok_or_else(|| {
            EngineError::Catalog(format!("column {table}.{column} not in catalog"))
        })
    }
}

impl SchemaProvider for Catalog {
    fn column_type(&self, table: &str, column: &str) -> Option<ValueType> {
        self.column(table, column).map(|c| c.vtype)
    }

    fn has_table(&self, table: &str) -> bool {
        self.table(table).is_some()
    }
}

pub fn open_catalog(dir: &Path) -> Result<Catalog> {
    let desc = dir.join(CATALOG_FILE);
    if !desc.exists() {
        return Err(EngineError::Catalog("catalog descriptor not found".into()));
    }
    let text = fs::read_to_string(&desc).map_err(|e| EngineError::io(&desc, e))?;

    let mut tables: Vec<TableMeta> = Vec::new();
    let mut columns: Vec<ColumnMeta> = Vec::new();
    let mut cols_per_table: BTreeMap<String, u32> = BTreeMap::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(EngineError::Catalog(format!(
                "{CATALOG_FILE} line {lineno}: expected 6 tab-separated fields, found {}",
                f.len()
            )));
        }
        let (table, column) = (f[0].to_string(), f[1].to_string());
        let vtype = ValueType::parse(f[2]).ok_or_else(|| {
            EngineError::Catalog(format!(
                "{CATALOG_FILE} line {lineno}: unknown type '{}'",
                f[2]
            ))
        })?;
        let width: u32 = f[3].parse().map_err(|_| {
            EngineError::Catalog(format!("{CATALOG_FILE} line {lineno}: bad width '{}'", f[3]))
        })?;
        if width != vtype.width() {
            return Err(EngineError::Catalog(format!(
                "{table}.{column}: declared width {width} does not match type {vtype}"
            )));
        }
        let row_count: u64 = f[4].parse().map_err(|_| {
            EngineError::Catalog(format!(
                "{CATALOG_FILE} line {lineno}: bad row_count '{}'",
                f[4]
            ))
        })?;

        let table_id = match tables.iter().position(|t| t.name == table) {
            Some(i) => {
                if tables[i].row_count != row_count {
                    return Err(EngineError::Catalog(format!(
                        "{table}.{column}: row_count {row_count} disagrees with table's {}",
                        tables[i].row_count
                    )));
                }
                tables[i].table_id
            }
            None => {
                let id = tables.len() as u32;
                tables.push(TableMeta {
                    name: table.clone(),
                    row_count,
                    table_id: id,
                });
                id
            }
        };
        let column_id = {
            let n = cols_per_table.entry(table.clone()).or_insert(0);
            let id = *n;
            *n += 1;
            id
        };
        if columns.iter().any(|c| c.table == table && c.column == column) {
            return Err(EngineError::Catalog(format!(
                "duplicate column {table}.{column}"
            )));
        }

        columns.push(ColumnMeta {
            table,
            column,
            vtype,
            width,
            row_count,
            path: dir.join(f[5]),
            table_id,
            column_id,
        });
    }

    for col in &columns {
        validate_column_file(col)?;
    }

    Ok(Catalog {
        dir: dir.to_path_buf(),
        tables,
        columns,
    })
}

fn validate_column_file(col: &ColumnMeta) -> Result<()> {
    let name = col.qualified();
    let meta = fs::metadata(&col.path).map_err(|_| {
        EngineError::Catalog(format!("{name}: column file {:?} missing", col.path))
    })?;
    let expect = col.page_count() * PAGE_SIZE as u64;
    if meta.len() != expect {
        return Err(EngineError::Catalog(format!(
            "{name}: file is {} bytes, expected {expect} ({} pages)",
            meta.len(),
            col.page_count()
        )));
    }
    if col.page_count() > 0 {
        let mut head = [0u8; PAGE_HEADER_LEN];
        let f = fs::File::open(&col.path).map_err(|e| EngineError::io(&col.path, e))?;
        use std::io::Read;
        (&f).take(PAGE_HEADER_LEN as u64)
            .read_exact(&mut head)
            .map_err(|e| EngineError::io(&col.path, e))?;
        let h = PageHeader::decode(&head, &name)?;
        if h.table_id != col.table_id || h.column_id != col.column_id || h.first_row != 0 {
            return Err(EngineError::Catalog(format!(
                "{name}: first page header ids {:?} disagree with catalog ({}, {}, first_row 0)",
                (h.table_id, h.column_id, h.first_row),
                col.table_id,
                col.column_id
            )));
        }
    }
    Ok(())
}
