use std::collections::BTreeSet;
use std::fmt;

use crate::expr::{CmpOp, Expr, ExprKind};
use crate::value::ValueType;
use crate::IrError;

/// Qualified column reference; `table` is the binding alias, not
/// necessarily the physical table name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrRef {
    pub table: String,
    pub column: String,
}

impl AttrRef {
    pub fn new(table: &str, column: &str) -> AttrRef {
        AttrRef {
            table: table.to_string(),
            column: column.to_string(),
        }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableBinding {
    pub table: String,
    pub alias: String,
}

/// One equi-join key pair, oriented: `left` belongs to the edge's first
/// alias, `right` to its second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub left: AttrRef,
    pub right: AttrRef,
}

/// Equi-join between two bound tables; `keys` is non-empty and every pair
/// references the same (left, right) alias pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEdge {
    pub keys: Vec<KeyPair>,
}

impl JoinEdge {
    pub fn left_alias(&self) -> &str {
        &self.keys[0].left.table
    }

    pub fn right_alias(&self) -> &str {
        &self.keys[0].right.table
    }
}

/// Single-table selection predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterSpec {
    pub expr: Expr,
}

impl FilterSpec {
    /// Alias of the one table the predicate touches. Valid only after
    /// `validate` has passed.
    pub fn table(&self) -> String {
        self.expr
            .tables()
            .into_iter()
            .next()
            .expect("validated filter references one table")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectItem {
    Attr(AttrRef),
    Expr(Expr),
}

impl SelectItem {
    pub fn columns(&self) -> Vec<AttrRef> {
        match self {
            SelectItem::Attr(a) => vec![a.clone()],
            SelectItem::Expr(e) => e.columns(),
        }
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Attr(a) => write!(f, "{a}"),
            SelectItem::Expr(e) => write!(f, "{e}"),
        }
    }
}

/// Select-project-join query. Join order is explicit and final: the plan
/// builders execute `joins` in list order, there is no optimizer. Edges
/// after the first must each bind exactly one new table (left-deep chain).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryIR {
    pub name: String,
    pub tables: Vec<TableBinding>,
    pub joins: Vec<JoinEdge>,
    pub filters: Vec<FilterSpec>,
    pub select: Vec<SelectItem>,
}

impl QueryIR {
    pub fn binding(&self, alias: &str) -> Option<&TableBinding> {
        self.tables.iter().find(|b| b.alias == alias)
    }

    /// Physical table name behind an alias.
    pub fn physical(&self, alias: &str) -> Option<&str> {
        self.binding(alias).map(|b| b.table.as_str())
    }

    /// Filters on a given alias, in declaration order.
    pub fn filters_on(&self, alias: &str) -> Vec<&FilterSpec> {
        self.filters
            .iter()
            .filter(|f| f.table() == alias)
            .collect()
    }

    /// Number of join key predicates across all edges.
    pub fn join_predicate_count(&self) -> usize {
        self.joins.iter().map(|j| j.keys.len()).sum()
    }
}

/// Source of column type information; implemented by the static built-in
/// schema and by the engine's on-disk catalog.
pub trait SchemaProvider {
    fn column_type(&self, table: &str, column: &str) -> Option<ValueType>;
    fn has_table(&self, table: &str) -> bool;
}

struct Resolver<'a> {
    ir: &'a QueryIR,
    schema: &'a dyn SchemaProvider,
}

impl Resolver<'_> {
    fn attr_type(&self, a: &AttrRef) -> Result<ValueType, IrError> {
        let phys = self
            .ir
            .physical(&a.table)
            .ok_or_else(|| IrError::Validate(format!("unknown table alias '{}'", a.table)))?;
        self.schema
            .column_type(phys, &a.column)
            .ok_or_else(|| IrError::Validate(format!("unknown column {a}")))
    }

    fn kind(&self, e: &Expr) -> Result<ExprKind, IrError> {
        match e {
            Expr::Col(a) => Ok(if self.attr_type(a)?.is_numeric() {
                ExprKind::Num
            } else {
                ExprKind::Text
            }),
            Expr::IntLit(_) => Ok(ExprKind::Num),
            Expr::StrLit(_) => Ok(ExprKind::Text),
            Expr::Arith(l, op, r) => {
                let (lk, rk) = (self.kind(l)?, self.kind(r)?);
                if lk == ExprKind::Num && rk == ExprKind::Num {
                    Ok(ExprKind::Num)
                } else {
                    Err(IrError::Validate(format!(
                        "arithmetic '{op}' needs numeric operands in '{e}'"
                    )))
                }
            }
            Expr::Cmp(l, op, r) => {
                let (lk, rk) = (self.kind(l)?, self.kind(r)?);
                match (lk, rk, op) {
                    (ExprKind::Num, ExprKind::Num, _) => Ok(ExprKind::Bool),
                    (ExprKind::Text, ExprKind::Text, CmpOp::Eq) => Ok(ExprKind::Bool),
                    _ => Err(IrError::Validate(format!(
                        "comparison type mismatch in '{e}'"
                    ))),
                }
            }
            Expr::And(l, r) => {
                if self.kind(l)? == ExprKind::Bool && self.kind(r)? == ExprKind::Bool {
                    Ok(ExprKind::Bool)
                } else {
                    Err(IrError::Validate(format!(
                        "'and' needs boolean operands in '{e}'"
                    )))
                }
            }
        }
    }
}

/// Check an IR against a schema: aliases resolve, columns exist, types line
/// up, filters are single-table, joins form a connected left-deep chain in
/// list order, and the select list is non-empty.
pub fn validate(ir: &QueryIR, schema: &dyn SchemaProvider) -> Result<(), IrError> {
    if ir.tables.is_empty() {
        return Err(IrError::Validate("query binds no tables".into()));
    }
    let mut seen = BTreeSet::new();
    for b in &ir.tables {
        if !schema.has_table(&b.table) {
            return Err(IrError::Validate(format!("unknown table '{}'", b.table)));
        }
        if !seen.insert(b.alias.clone()) {
            return Err(IrError::Validate(format!("duplicate alias '{}'", b.alias)));
        }
    }

    let r = Resolver { ir, schema };

    let mut bound: BTreeSet<&str> = BTreeSet::new();
    for (i, edge) in ir.joins.iter().enumerate() {
        if edge.keys.is_empty() {
            return Err(IrError::Validate(format!("join {i} has no key pairs")));
        }
        let (la, ra) = (edge.left_alias(), edge.right_alias());
        if la == ra {
            return Err(IrError::Validate(format!("join {i} joins '{la}' to itself")));
        }
        for k in &edge.keys {
            if k.left.table != la || k.right.table != ra {
                return Err(IrError::Validate(format!(
                    "join {i}: key pair {} = {} does not match edge sides {la}/{ra}",
                    k.left, k.right
                )));
            }
            let (lt, rt) = (r.attr_type(&k.left)?, r.attr_type(&k.right)?);
            if lt.is_numeric() != rt.is_numeric() {
                return Err(IrError::Validate(format!(
                    "join {i}: key type mismatch {} = {}",
                    k.left, k.right
                )));
            }
        }
        if i == 0 {
            bound.insert(la);
            bound.insert(ra);
        } else {
            let new = match (bound.contains(la), bound.contains(ra)) {
                (true, false) => ra,
                (false, true) => la,
                (true, true) => {
                    return Err(IrError::Validate(format!(
                        "join {i} binds no new table; the join list must be a chain"
                    )))
                }
                (false, false) => {
                    return Err(IrError::Validate(format!(
                        "join {i} is disconnected from the tables joined so far"
                    )))
                }
            };
            bound.insert(new);
        }
    }
    if ir.tables.len() > 1 {
        for b in &ir.tables {
            if !bound.contains(b.alias.as_str()) {
                return Err(IrError::Validate(format!(
                    "table '{}' is not reached by any join",
                    b.alias
                )));
            }
        }
    } else if !ir.joins.is_empty() {
        return Err(IrError::Validate(
            "single-table query cannot have joins".into(),
        ));
    }

    for f in &ir.filters {
        let tables = f.expr.tables();
        if tables.len() != 1 {
            return Err(IrError::Validate(format!(
                "filter '{}' must reference exactly one table, found {}",
                f.expr,
                tables.len()
            )));
        }
        if r.kind(&f.expr)? != ExprKind::Bool {
            return Err(IrError::Validate(format!(
                "filter '{}' is not a predicate",
                f.expr
            )));
        }
    }

    if ir.select.is_empty() {
        return Err(IrError::Validate("empty select list".into()));
    }
    for item in &ir.select {
        match item {
            SelectItem::Attr(a) => {
                r.attr_type(a)?;
            }
            SelectItem::Expr(e) => {
                if r.kind(e)? == ExprKind::Bool {
                    return Err(IrError::Validate(format!(
                        "select item '{e}' is a predicate, not a value"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{builtin_query, TpchSchema};

    #[test]
    fn builtins_validate() {
        for name in ["q5mod", "q5mod_nocname", "q9mod"] {
            let q = builtin_query(name).unwrap();
            validate(&q, &TpchSchema).unwrap();
        }
    }

    #[test]
    fn q9mod_has_six_join_predicates_and_one_filter() {
        let q = builtin_query("q9mod").unwrap();
        assert_eq!(q.join_predicate_count(), 6);
        assert_eq!(q.filters.len(), 1);
    }

    #[test]
    fn broken_chain_rejected() {
        let mut q = builtin_query("q5mod").unwrap();
        q.joins.remove(1);
        let err = validate(&q, &TpchSchema).unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn cross_table_filter_rejected() {
        let mut q = builtin_query("q5mod").unwrap();
        q.filters.push(FilterSpec {
            expr: Expr::col("nation", "n_nationkey").eq(Expr::col("customer", "c_custkey")),
        });
        assert!(validate(&q, &TpchSchema).is_err());
    }

    #[test]
    fn string_order_comparison_rejected() {
        let mut q = builtin_query("q5mod").unwrap();
        q.filters[0].expr = Expr::col("nation", "n_name").gt(Expr::StrLit("A".into()));
        assert!(validate(&q, &TpchSchema).is_err());
    }
}
