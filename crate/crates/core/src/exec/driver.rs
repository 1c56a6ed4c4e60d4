//! Runs a plan to completion and evaluates the select list over the final
//! tuple stream.

use std::time::Instant;

use hmdb_ir::{Row, SelectItem};

use crate::exec::eval::{compile, BoundExpr};
use crate::exec::{ExecCtx, PlanOp};
use crate::Result;

/// Pull every block out of `root`, which must produce tuple blocks, and
/// evaluate `select` per row. Query counters are framed by
/// `begin_query`/`finish_query` so a later metrics snapshot covers exactly
/// this run.
pub fn run_plan(root: &mut PlanOp, ctx: &ExecCtx, select: &[SelectItem]) -> Result<Vec<Row>> {
    ctx.begin_query();
    let started = Instant::now();
    let result = drive(root, ctx, select);
    ctx.finish_query(started.elapsed().as_secs_f64() * 1e3);
    result
}

fn drive(root: &mut PlanOp, ctx: &ExecCtx, select: &[SelectItem]) -> Result<Vec<Row>> {
    root.open(ctx)?;
    let mut bound: Option<Vec<BoundExpr>> = None;
    let mut rows: Vec<Row> = Vec::new();
    while let Some(block) = root.next(ctx)? {
        let block = block.into_tuple()?;
        if bound.is_none() {
            let mut items = Vec::with_capacity(select.len());
            for item in select {
                let expr = match item {
                    SelectItem::Attr(a) => hmdb_ir::Expr::Col(a.clone()),
                    SelectItem::Expr(e) => e.clone(),
                };
                items.push(compile(&expr, &|a| block.schema.index_of(a))?);
            }
            bound = Some(items);
        }
        let items = bound.as_ref().unwrap();
        for row in &block.rows {
            let mut out = Row::with_capacity(items.len());
            for item in items {
                out.push(item.eval_row(row)?);
            }
            rows.push(out);
        }
    }
    root.close(ctx)?;
    Ok(rows)
}
