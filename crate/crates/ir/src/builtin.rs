//! Static schema for the generated workload plus the built-in queries.

use crate::expr::Expr;
use crate::query::{
    AttrRef, FilterSpec, JoinEdge, KeyPair, QueryIR, SchemaProvider, SelectItem, TableBinding,
};
use crate::value::ValueType;

pub struct TableDef {
    pub name: &'static str,
    pub columns: &'static [(&'static str, ValueType)],
    /// Row count at scale factor 1. Tables with `scaled == false` keep this
    /// count at every scale factor.
    pub base_rows: u64,
    pub scaled: bool,
}

const I64: ValueType = ValueType::Int64;
const DEC: ValueType = ValueType::Decimal2;
const C25: ValueType = ValueType::Char(25);

pub static TPCH_TABLES: &[TableDef] = &[
    TableDef {
        name: "region",
        columns: &[("r_regionkey", I64), ("r_name", C25)],
        base_rows: 5,
        scaled: false,
    },
    TableDef {
        name: "nation",
        columns: &[("n_nationkey", I64), ("n_name", C25), ("n_regionkey", I64)],
        base_rows: 25,
        scaled: false,
    },
    TableDef {
        name: "supplier",
        columns: &[("s_suppkey", I64), ("s_name", C25), ("s_nationkey", I64)],
        base_rows: 10_000,
        scaled: true,
    },
    TableDef {
        name: "customer",
        columns: &[("c_custkey", I64), ("c_name", C25), ("c_nationkey", I64)],
        base_rows: 150_000,
        scaled: true,
    },
    TableDef {
        name: "part",
        columns: &[("p_partkey", I64), ("p_name", C25), ("p_size", I64)],
        base_rows: 200_000,
        scaled: true,
    },
    TableDef {
        name: "partsupp",
        columns: &[
            ("ps_partkey", I64),
            ("ps_suppkey", I64),
            ("ps_supplycost", DEC),
            ("ps_availqty", I64),
        ],
        base_rows: 800_000,
        scaled: true,
    },
    TableDef {
        name: "orders",
        columns: &[
            ("o_orderkey", I64),
            ("o_custkey", I64),
            ("o_totalprice", DEC),
            ("o_shippriority", I64),
        ],
        base_rows: 1_500_000,
        scaled: true,
    },
    TableDef {
        name: "lineitem",
        columns: &[
            ("l_orderkey", I64),
            ("l_partkey", I64),
            ("l_suppkey", I64),
            ("l_quantity", DEC),
            ("l_extendedprice", DEC),
            ("l_discount", DEC),
        ],
        base_rows: 6_000_000,
        scaled: true,
    },
];

pub fn table_def(name: &str) -> Option<&'static TableDef> {
    TPCH_TABLES.iter().find(|t| t.name == name)
}

/// Schema of the generated dataset.
pub struct TpchSchema;

impl SchemaProvider for TpchSchema {
    fn column_type(&self, table: &str, column: &str) -> Option<ValueType> {
        table_def(table)?
            .columns
            .iter()
            .find(|(c, _)| *c == column)
            .map(|(_, t)| *t)
    }

    fn has_table(&self, table: &str) -> bool {
        table_def(table).is_some()
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["q5mod", "q5mod_nocname", "q9mod"]
}

pub fn builtin_query(name: &str) -> Option<QueryIR> {
    match name {
        "q5mod" => Some(q5(true)),
        "q5mod_nocname" => Some(q5(false)),
        "q9mod" => Some(q9()),
        _ => None,
    }
}

fn bind(names: &[&str]) -> Vec<TableBinding> {
    names
        .iter()
        .map(|n| TableBinding {
            table: n.to_string(),
            alias: n.to_string(),
        })
        .collect()
}

fn edge(pairs: &[(&str, &str, &str, &str)]) -> JoinEdge {
    JoinEdge {
        keys: pairs
            .iter()
            .map(|(lt, lc, rt, rc)| KeyPair {
                left: AttrRef::new(lt, lc),
                right: AttrRef::new(rt, rc),
            })
            .collect(),
    }
}

/// Four-table chain: nation, customer, orders, lineitem; one nation filter.
/// The revenue item works in the scaled integer domain, so `1.00` is the
/// literal 100.
fn q5(with_cname: bool) -> QueryIR {
    let mut select = Vec::new();
    if with_cname {
        select.push(SelectItem::Attr(AttrRef::new("customer", "c_name")));
    }
    select.push(SelectItem::Attr(AttrRef::new("orders", "o_totalprice")));
    select.push(SelectItem::Attr(AttrRef::new("orders", "o_shippriority")));
    select.push(SelectItem::Attr(AttrRef::new("lineitem", "l_orderkey")));
    select.push(SelectItem::Expr(
        Expr::col("lineitem", "l_extendedprice")
            .mul(Expr::IntLit(100).sub(Expr::col("lineitem", "l_discount"))),
    ));
    QueryIR {
        name: if with_cname { "q5mod" } else { "q5mod_nocname" }.to_string(),
        tables: bind(&["nation", "customer", "orders", "lineitem"]),
        joins: vec![
            edge(&[("nation", "n_nationkey", "customer", "c_nationkey")]),
            edge(&[("customer", "c_custkey", "orders", "o_custkey")]),
            edge(&[("orders", "o_orderkey", "lineitem", "l_orderkey")]),
        ],
        filters: vec![FilterSpec {
            expr: Expr::col("nation", "n_name").eq(Expr::StrLit("ALGERIA".into())),
        }],
        select,
    }
}

/// Six-table chain with lineitem as the spine; profit item spans four
/// tables. The partsupp edge is the one composite (two-key) join.
fn q9() -> QueryIR {
    let profit = Expr::col("lineitem", "l_extendedprice")
        .mul(Expr::IntLit(100).sub(Expr::col("lineitem", "l_discount")))
        .sub(Expr::col("partsupp", "ps_supplycost").mul(Expr::col("lineitem", "l_quantity")));
    QueryIR {
        name: "q9mod".to_string(),
        tables: bind(&[
            "part", "supplier", "lineitem", "partsupp", "orders", "nation",
        ]),
        joins: vec![
            edge(&[("part", "p_partkey", "lineitem", "l_partkey")]),
            edge(&[
                ("partsupp", "ps_partkey", "lineitem", "l_partkey"),
                ("partsupp", "ps_suppkey", "lineitem", "l_suppkey"),
            ]),
            edge(&[("supplier", "s_suppkey", "lineitem", "l_suppkey")]),
            edge(&[("orders", "o_orderkey", "lineitem", "l_orderkey")]),
            edge(&[("nation", "n_nationkey", "supplier", "s_nationkey")]),
        ],
        filters: vec![FilterSpec {
            expr: Expr::col("part", "p_size").gt(Expr::IntLit(25)),
        }],
        select: vec![
            SelectItem::Attr(AttrRef::new("nation", "n_name")),
            SelectItem::Attr(AttrRef::new("orders", "o_totalprice")),
            SelectItem::Expr(profit),
        ],
    }
}
