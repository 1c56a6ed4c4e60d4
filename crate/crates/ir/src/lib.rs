//! Query intermediate representation shared by the engine, the verification
//! oracle, and the CLI.
//!
//! This crate is deliberately free of any storage or execution code: the
//! oracle crate depends on it alone, so the reference implementation stays
//! build-level separated from the engine it checks.

mod builtin;
mod expr;
mod parse;
mod query;
mod rowset;
mod value;

pub use builtin::{builtin_names, builtin_query, table_def, TableDef, TpchSchema, TPCH_TABLES};
pub use expr::{ArithOp, CmpOp, Expr, ExprKind};
pub use parse::parse_query_text;
pub use query::{
    validate, AttrRef, FilterSpec, JoinEdge, KeyPair, QueryIR, SchemaProvider, SelectItem,
    TableBinding,
};
pub use rowset::{canonicalize, compare_multisets, Row, RowSetDiff};
pub use value::{Value, ValueType};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IrError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid query: {0}")]
    Validate(String),
}
