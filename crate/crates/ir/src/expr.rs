use std::collections::BTreeSet;
use std::fmt;

use crate::query::AttrRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
}

/// Scalar/boolean expression over qualified column references. Decimal
/// literals are pre-scaled to their int64 representation at construction,
/// so evaluation is plain integer arithmetic everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Col(AttrRef),
    IntLit(i64),
    StrLit(String),
    Arith(Box<Expr>, ArithOp, Box<Expr>),
    Cmp(Box<Expr>, CmpOp, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
}

/// Coarse expression type used during validation: numeric columns and
/// literals are `Num` (int64 and decimal2 share one integer domain),
/// char columns and string literals are `Text`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprKind {
    Num,
    Text,
    Bool,
}

impl Expr {
    pub fn col(table: &str, column: &str) -> Expr {
        Expr::Col(AttrRef::new(table, column))
    }

    pub fn eq(self, rhs: Expr) -> Expr {
        Expr::Cmp(Box::new(self), CmpOp::Eq, Box::new(rhs))
    }

    pub fn gt(self, rhs: Expr) -> Expr {
        Expr::Cmp(Box::new(self), CmpOp::Gt, Box::new(rhs))
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::Arith(Box::new(self), ArithOp::Mul, Box::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        Expr::Arith(Box::new(self), ArithOp::Sub, Box::new(rhs))
    }

    pub fn and(self, rhs: Expr) -> Expr {
        Expr::And(Box::new(self), Box::new(rhs))
    }

    /// All column references, in first-appearance order, deduplicated.
    pub fn columns(&self) -> Vec<AttrRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut Vec<AttrRef>) {
        match self {
            Expr::Col(a) => {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
            Expr::IntLit(_) | Expr::StrLit(_) => {}
            Expr::Arith(l, _, r) | Expr::Cmp(l, _, r) | Expr::And(l, r) => {
                l.collect_columns(out);
                r.collect_columns(out);
            }
        }
    }

    /// Distinct table aliases referenced.
    pub fn tables(&self) -> BTreeSet<String> {
        self.columns().into_iter().map(|a| a.table).collect()
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        })
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Col(a) => write!(f, "{a}"),
            Expr::IntLit(v) => write!(f, "{v}"),
            Expr::StrLit(s) => write!(f, "'{s}'"),
            Expr::Arith(l, op, r) => {
                let needs = |e: &Expr| matches!(e, Expr::Arith(..)) && *op == ArithOp::Mul;
                if needs(l) {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {op} ")?;
                if needs(r) {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            Expr::Cmp(l, op, r) => write!(f, "{l} {op} {r}"),
            Expr::And(l, r) => write!(f, "{l} and {r}"),
        }
    }
}
