//! Reference evaluator for result verification.
//!
//! This crate answers one question: what rows should a query produce on a
//! given dataset? It shares no storage or operator code with the engine.
//! It has its own descriptor parser and page decoder, loads every column
//! fully into memory, and evaluates queries by filtering candidate rows
//! and nested-loop joining them in the order the query lists its edges.
//! Everything is done the slow, obvious way on purpose: a bug would have
//! to be made twice, in two unrelated shapes, to go unnoticed.
//!
//! Datasets above 1 GiB of declared column bytes are refused, since the
//! whole point is in-memory evaluation at desk scale.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hmdb_ir::{
    validate, ArithOp, AttrRef, CmpOp, Expr, QueryIR, Row, SchemaProvider, Value, ValueType,
};

// ── Errors ──

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("oracle load error: {0}")]
    Load(String),
    #[error("oracle query error: {0}")]
    Query(String),
    #[error(transparent)]
    Ir(#[from] hmdb_ir::IrError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn load_err(msg: String) -> OracleError {
    OracleError::Load(msg)
}

// ── On-disk format (independent copy) ──
//
// Pages are 4096 bytes: a 24-byte header ("HMCF", table id u32, column id
// u32, first row u64, rows-in-page u32, all little-endian), then that many
// fixed-width values, then zero padding.

const PAGE_SIZE: usize = 4096;
const PAGE_HEADER: usize = 24;
const MAGIC: &[u8; 4] = b"HMCF";
const DESCRIPTOR: &str = "catalog.tsv";

/// Hard ceiling on declared column bytes, checked before any file is read.
pub const LOAD_CAP_BYTES: u64 = 1 << 30;

struct ColumnDesc {
    table: String,
    column: String,
    vtype: ValueType,
    row_count: u64,
    file: String,
}

fn parse_descriptor(dir: &Path) -> Result<Vec<ColumnDesc>> {
    let path = dir.join(DESCRIPTOR);
    if !path.exists() {
        return Err(load_err(format!("{} has no {DESCRIPTOR}", dir.display())));
    }
    let text = fs::read_to_string(&path).map_err(|source| OracleError::Io {
        path: path.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(load_err(format!(
                "{DESCRIPTOR} line {}: {} fields, expected 6",
                idx + 1,
                f.len()
            )));
        }
        let vtype = ValueType::parse(f[2])
            .ok_or_else(|| load_err(format!("{DESCRIPTOR} line {}: bad type '{}'", idx + 1, f[2])))?;
        let width: u32 = f[3]
            .parse()
            .map_err(|_| load_err(format!("{DESCRIPTOR} line {}: bad width", idx + 1)))?;
        if width != vtype.width() {
            return Err(load_err(format!(
                "{DESCRIPTOR} line {}: width {width} does not fit {vtype}",
                idx + 1
            )));
        }
        let row_count: u64 = f[4]
            .parse()
            .map_err(|_| load_err(format!("{DESCRIPTOR} line {}: bad row count", idx + 1)))?;
        out.push(ColumnDesc {
            table: f[0].to_string(),
            column: f[1].to_string(),
            vtype,
            row_count,
            file: f[5].to_string(),
        });
    }
    Ok(out)
}

fn decode_column(dir: &Path, desc: &ColumnDesc) -> Result<Vec<Value>> {
    let path = dir.join(&desc.file);
    let bytes = fs::read(&path).map_err(|source| OracleError::Io {
        path: path.clone(),
        source,
    })?;
    if bytes.len() % PAGE_SIZE != 0 {
        return Err(load_err(format!(
            "{}: {} bytes is not a whole number of pages",
            desc.file,
            bytes.len()
        )));
    }
    let width = desc.vtype.width() as usize;
    let mut values: Vec<Value> = Vec::with_capacity(desc.row_count as usize);
    for page in bytes.chunks_exact(PAGE_SIZE) {
        if &page[0..4] != MAGIC {
            return Err(load_err(format!("{}: bad page magic", desc.file)));
        }
        let first_row = u64::from_le_bytes(page[12..20].try_into().unwrap());
        let in_page = u32::from_le_bytes(page[20..24].try_into().unwrap()) as usize;
        if first_row != values.len() as u64 {
            return Err(load_err(format!(
                "{}: page claims first row {first_row}, expected {}",
                desc.file,
                values.len()
            )));
        }
        if PAGE_HEADER + in_page * width > PAGE_SIZE {
            return Err(load_err(format!(
                "{}: page claims {in_page} rows of width {width}",
                desc.file
            )));
        }
        for i in 0..in_page {
            let slot = &page[PAGE_HEADER + i * width..PAGE_HEADER + (i + 1) * width];
            values.push(match desc.vtype {
                ValueType::Int64 | ValueType::Decimal2 => {
                    Value::Int(i64::from_le_bytes(slot.try_into().unwrap()))
                }
                ValueType::Char(_) => {
                    let text = std::str::from_utf8(slot)
                        .map_err(|_| load_err(format!("{}: non-utf8 text value", desc.file)))?;
                    Value::Str(text.trim_end_matches(' ').to_string())
                }
            });
        }
    }
    if values.len() as u64 != desc.row_count {
        return Err(load_err(format!(
            "{}: decoded {} rows, descriptor says {}",
            desc.file,
            values.len(),
            desc.row_count
        )));
    }
    Ok(values)
}

// ── Loaded dataset ──

#[derive(Debug)]
struct Column {
    vtype: ValueType,
    values: Vec<Value>,
}

#[derive(Debug)]
struct Table {
    row_count: u64,
    columns: BTreeMap<String, Column>,
}

#[derive(Debug)]
pub struct OracleDb {
    tables: BTreeMap<String, Table>,
}

impl OracleDb {
    pub fn table_rows(&self, table: &str) -> Option<u64> {
        self.tables.get(table).map(|t| t.row_count)
    }

    fn column(&self, table: &str, column: &str) -> Result<&Column> {
        self.tables
            .get(table)
            .and_then(|t| t.columns.get(column))
            .ok_or_else(|| OracleError::Query(format!("no column {table}.{column} loaded")))
    }
}

impl SchemaProvider for OracleDb {
    fn column_type(&self, table: &str, column: &str) -> Option<ValueType> {
        self.tables
            .get(table)
            .and_then(|t| t.columns.get(column))
            .map(|c| c.vtype)
    }

    fn has_table(&self, table: &str) -> bool {
        self.tables.contains_key(table)
    }
}

/// Load every column of the dataset into memory.
pub fn load(dir: &Path) -> Result<OracleDb> {
    let descs = parse_descriptor(dir)?;

    // Refuse oversized datasets before touching any column file.
    let declared: u64 = descs
        .iter()
        .map(|d| d.row_count * d.vtype.width() as u64)
        .sum();
    if declared > LOAD_CAP_BYTES {
        return Err(load_err(format!(
            "dataset declares {declared} bytes of column data; refusing to load more than {LOAD_CAP_BYTES} into memory"
        )));
    }

    let mut tables: BTreeMap<String, Table> = BTreeMap::new();
    for desc in &descs {
        let values = decode_column(dir, desc)?;
        let table = tables.entry(desc.table.clone()).or_insert(Table {
            row_count: desc.row_count,
            columns: BTreeMap::new(),
        });
        if table.row_count != desc.row_count {
            return Err(load_err(format!(
                "{}: {} rows, other columns of {} have {}",
                desc.file, desc.row_count, desc.table, table.row_count
            )));
        }
        if table
            .columns
            .insert(
                desc.column.clone(),
                Column {
                    vtype: desc.vtype,
                    values,
                },
            )
            .is_some()
        {
            return Err(load_err(format!(
                "duplicate descriptor entry for {}.{}",
                desc.table, desc.column
            )));
        }
    }
    Ok(OracleDb { tables })
}

// ── Expression evaluation ──

fn eval(expr: &Expr, row: &dyn Fn(&AttrRef) -> Result<Value>) -> Result<Value> {
    match expr {
        Expr::Col(a) => row(a),
        Expr::IntLit(v) => Ok(Value::Int(*v)),
        Expr::StrLit(s) => Ok(Value::Str(s.clone())),
        Expr::Arith(l, op, r) => {
            let (l, r) = (num(&eval(l, row)?)?, num(&eval(r, row)?)?);
            Ok(Value::Int(match op {
                ArithOp::Add => l + r,
                ArithOp::Sub => l - r,
                ArithOp::Mul => l * r,
            }))
        }
        Expr::Cmp(l, op, r) => {
            let (l, r) = (eval(l, row)?, eval(r, row)?);
            let hit = match op {
                CmpOp::Eq => l == r,
                CmpOp::Lt => cmp_lt(&l, &r)?,
                CmpOp::Gt => cmp_lt(&r, &l)?,
            };
            Ok(Value::Int(hit as i64))
        }
        Expr::And(l, r) => {
            let hit = truthy(&eval(l, row)?)? && truthy(&eval(r, row)?)?;
            Ok(Value::Int(hit as i64))
        }
    }
}

fn num(v: &Value) -> Result<i64> {
    v.as_int()
        .ok_or_else(|| OracleError::Query("arithmetic over a text value".into()))
}

fn cmp_lt(l: &Value, r: &Value) -> Result<bool> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok(a < b),
        (Value::Str(a), Value::Str(b)) => Ok(a < b),
        _ => Err(OracleError::Query("ordering across value kinds".into())),
    }
}

fn truthy(v: &Value) -> Result<bool> {
    match v {
        Value::Int(b) => Ok(*b != 0),
        Value::Str(_) => Err(OracleError::Query("text value used as a predicate".into())),
    }
}

// ── Query evaluation ──

impl OracleDb {
    /// Evaluate the query and return its result rows in no particular
    /// order. Filters run per table first, then join edges in list order.
    pub fn run(&self, query: &QueryIR) -> Result<Vec<Row>> {
        validate(query, self)?;

        // Candidate row indexes per alias, after that alias's filters.
        let mut cands: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for binding in &query.tables {
            let table = self
                .tables
                .get(&binding.table)
                .ok_or_else(|| OracleError::Query(format!("no table {} loaded", binding.table)))?;
            let mut rows: Vec<u32> = (0..table.row_count as u32).collect();
            for filter in &query.filters {
                if filter.table() != binding.alias {
                    continue;
                }
                let mut kept = Vec::new();
                for i in rows {
                    let v = eval(&filter.expr, &|a| {
                        self.value_at(query, a, &binding.alias, i)
                    })?;
                    if truthy(&v)? {
                        kept.push(i);
                    }
                }
                rows = kept;
            }
            cands.insert(binding.alias.clone(), rows);
        }

        // Bound tuples: one u32 per alias in `bound` order. Key columns
        // are resolved once per edge; the nested loops below index plain
        // vectors and nothing else.
        let mut bound: Vec<String> = Vec::new();
        let mut tuples: Vec<Vec<u32>> = Vec::new();

        if query.joins.is_empty() {
            let alias = &query.tables[0].alias;
            bound.push(alias.clone());
            tuples = cands[alias].iter().map(|&i| vec![i]).collect();
        }

        for edge in &query.joins {
            let left = edge.left_alias().to_string();
            let right = edge.right_alias().to_string();
            if bound.is_empty() {
                // First edge: nested loop over both candidate lists.
                let lk: Vec<Keys> = edge
                    .keys
                    .iter()
                    .map(|p| self.key_col(query, &p.left))
                    .collect::<Result<_>>()?;
                let rk: Vec<Keys> = edge
                    .keys
                    .iter()
                    .map(|p| self.key_col(query, &p.right))
                    .collect::<Result<_>>()?;
                let mut out = Vec::new();
                for &i in &cands[&left] {
                    for &j in &cands[&right] {
                        if keys_equal(&lk, i, &rk, j)? {
                            out.push(vec![i, j]);
                        }
                    }
                }
                bound.push(left);
                bound.push(right);
                tuples = out;
                continue;
            }
            let new_is_right = bound.contains(&left);
            let (old, new) = if new_is_right {
                (left, right)
            } else {
                (right, left)
            };
            if bound.contains(&new) {
                return Err(OracleError::Query(format!(
                    "join edge binds no new table (both {old} and {new} are bound)"
                )));
            }
            let slot = bound.iter().position(|b| b == &old).unwrap();
            let ok: Vec<Keys> = edge
                .keys
                .iter()
                .map(|p| self.key_col(query, if new_is_right { &p.left } else { &p.right }))
                .collect::<Result<_>>()?;
            let nk: Vec<Keys> = edge
                .keys
                .iter()
                .map(|p| self.key_col(query, if new_is_right { &p.right } else { &p.left }))
                .collect::<Result<_>>()?;
            let mut out = Vec::new();
            for tuple in &tuples {
                let i = tuple[slot];
                for &j in &cands[&new] {
                    if keys_equal(&ok, i, &nk, j)? {
                        let mut t = tuple.clone();
                        t.push(j);
                        out.push(t);
                    }
                }
            }
            bound.push(new);
            tuples = out;
        }

        // Select list over each surviving tuple.
        let mut result = Vec::with_capacity(tuples.len());
        for tuple in &tuples {
            let row_val = |a: &AttrRef| -> Result<Value> {
                let slot = bound
                    .iter()
                    .position(|b| b == &a.table)
                    .ok_or_else(|| OracleError::Query(format!("unbound alias {}", a.table)))?;
                self.value_at(query, a, &a.table, tuple[slot])
            };
            let mut row = Vec::with_capacity(query.select.len());
            for item in &query.select {
                row.push(match item {
                    hmdb_ir::SelectItem::Attr(a) => row_val(a)?,
                    hmdb_ir::SelectItem::Expr(e) => eval(e, &row_val)?,
                });
            }
            result.push(row);
        }
        Ok(result)
    }

    fn value_at(&self, query: &QueryIR, a: &AttrRef, alias: &str, row: u32) -> Result<Value> {
        if a.table != alias {
            return Err(OracleError::Query(format!(
                "attribute {a} does not belong to {alias}"
            )));
        }
        let phys = query
            .physical(alias)
            .ok_or_else(|| OracleError::Query(format!("unknown alias {alias}")))?;
        let col = self.column(phys, &a.column)?;
        Ok(col.values[row as usize].clone())
    }

    /// One join key column, resolved for tight-loop comparison. Numeric
    /// columns are copied out as raw integers so the hot compare is an
    /// i64 test rather than an enum match.
    fn key_col(&self, query: &QueryIR, a: &AttrRef) -> Result<Keys> {
        let phys = query
            .physical(&a.table)
            .ok_or_else(|| OracleError::Query(format!("unknown alias {}", a.table)))?;
        let col = self.column(phys, &a.column)?;
        if col.vtype.is_numeric() {
            let ints = col
                .values
                .iter()
                .map(|v| num(v))
                .collect::<Result<Vec<i64>>>()?;
            Ok(Keys::Num(ints))
        } else {
            Ok(Keys::Text(col.values.clone()))
        }
    }
}

enum Keys {
    Num(Vec<i64>),
    Text(Vec<Value>),
}

fn keys_equal(left: &[Keys], i: u32, right: &[Keys], j: u32) -> Result<bool> {
    for (l, r) in left.iter().zip(right) {
        let hit = match (l, r) {
            (Keys::Num(a), Keys::Num(b)) => a[i as usize] == b[j as usize],
            (Keys::Text(a), Keys::Text(b)) => a[i as usize] == b[j as usize],
            _ => {
                return Err(OracleError::Query(
                    "join key kinds differ between sides".into(),
                ))
            }
        };
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}
