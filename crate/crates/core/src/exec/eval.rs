//! Expressions bound to concrete column slots so per-row evaluation does no
//! name lookups.

use hmdb_ir::{ArithOp, AttrRef, CmpOp, Expr, ExprKind, Value};

use crate::{EngineError, Result};

#[derive(Debug, Clone)]
pub enum BoundExpr {
    Col(usize),
    IntLit(i64),
    StrLit(String),
    Arith(Box<BoundExpr>, ArithOp, Box<BoundExpr>),
    Cmp(Box<BoundExpr>, CmpOp, Box<BoundExpr>),
    And(Box<BoundExpr>, Box<BoundExpr>),
}

/// Bind every column reference in `expr` through `resolve`, which maps an
/// attribute to its slot in whatever row layout the caller evaluates over.
pub fn compile(expr: &Expr, resolve: &dyn Fn(&AttrRef) -> Option<usize>) -> Result<BoundExpr> {
    Ok(match expr {
        Expr::Col(attr) => match resolve(attr) {
            Some(idx) => BoundExpr::Col(idx),
            None => {
                return Err(EngineError::Exec(format!(
                    "expression references {attr} which is not in scope"
                )))
            }
        },
        Expr::IntLit(v) => BoundExpr::IntLit(*v),
        Expr::StrLit(s) => BoundExpr::StrLit(s.clone()),
        Expr::Arith(l, op, r) => BoundExpr::Arith(
            Box::new(compile(l, resolve)?),
            *op,
            Box::new(compile(r, resolve)?),
        ),
        Expr::Cmp(l, op, r) => BoundExpr::Cmp(
            Box::new(compile(l, resolve)?),
            *op,
            Box::new(compile(r, resolve)?),
        ),
        Expr::And(l, r) => BoundExpr::And(
            Box::new(compile(l, resolve)?),
            Box::new(compile(r, resolve)?),
        ),
    })
}

impl BoundExpr {
    pub fn kind(&self) -> ExprKind {
        match self {
            BoundExpr::Col(_) | BoundExpr::IntLit(_) | BoundExpr::Arith(..) => ExprKind::Num,
            BoundExpr::StrLit(_) => ExprKind::Text,
            BoundExpr::Cmp(..) | BoundExpr::And(..) => ExprKind::Bool,
        }
    }

    /// Evaluate a numeric or text expression; `get` fetches the value in a
    /// column slot for the current row.
    pub fn eval_with<F: Fn(usize) -> Value>(&self, get: &F) -> Result<Value> {
        match self {
            BoundExpr::Col(idx) => Ok(get(*idx)),
            BoundExpr::IntLit(v) => Ok(Value::Int(*v)),
            BoundExpr::StrLit(s) => Ok(Value::Str(s.clone())),
            BoundExpr::Arith(l, op, r) => {
                let a = int_of(l.eval_with(get)?)?;
                let b = int_of(r.eval_with(get)?)?;
                Ok(Value::Int(match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                }))
            }
            BoundExpr::Cmp(..) | BoundExpr::And(..) => Err(EngineError::Exec(
                "predicate used where a value was expected".into(),
            )),
        }
    }

    /// Evaluate a predicate for the current row.
    pub fn eval_pred_with<F: Fn(usize) -> Value>(&self, get: &F) -> Result<bool> {
        match self {
            BoundExpr::And(l, r) => Ok(l.eval_pred_with(get)? && r.eval_pred_with(get)?),
            BoundExpr::Cmp(l, op, r) => {
                let a = l.eval_with(get)?;
                let b = r.eval_with(get)?;
                match (&a, &b) {
                    (Value::Int(x), Value::Int(y)) => Ok(match op {
                        CmpOp::Eq => x == y,
                        CmpOp::Lt => x < y,
                        CmpOp::Gt => x > y,
                    }),
                    (Value::Str(x), Value::Str(y)) => match op {
                        CmpOp::Eq => Ok(x == y),
                        _ => Err(EngineError::Exec(
                            "ordered comparison on text values".into(),
                        )),
                    },
                    _ => Err(EngineError::Exec(format!(
                        "comparison between mismatched types: {a} and {b}"
                    ))),
                }
            }
            _ => Err(EngineError::Exec(
                "value expression used as a predicate".into(),
            )),
        }
    }

    pub fn eval_row(&self, row: &[Value]) -> Result<Value> {
        self.eval_with(&|i| row[i].clone())
    }

    pub fn eval_pred_row(&self, row: &[Value]) -> Result<bool> {
        self.eval_pred_with(&|i| row[i].clone())
    }
}

fn int_of(v: Value) -> Result<i64> {
    match v {
        Value::Int(x) => Ok(x),
        Value::Str(s) => Err(EngineError::Exec(format!(
            "arithmetic on text value '{s}'"
        ))),
    }
}
