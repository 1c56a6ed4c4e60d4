//! Classic operators: positional scan, filters on both block kinds, and the
//! positions-to-tuples materialization step.

use hmdb_ir::{AttrRef, Expr};

use crate::blocks::{pos_col_name, PosBlock, Schema, SchemaAttr, TupleBlock};
use crate::exec::eval::{compile, BoundExpr};
use crate::exec::{Block, ExecCtx, OpCore, PlanOp};
use crate::storage::{read_at_positions, ColumnMeta};
use crate::{EngineError, Result};

/// An attribute as the plan sees it: the binding alias (which names block
/// columns) plus the physical table that backs it in the catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysAttr {
    pub alias: String,
    pub table: String,
    pub column: String,
}

impl PhysAttr {
    pub fn new(alias: &str, table: &str, column: &str) -> PhysAttr {
        PhysAttr {
            alias: alias.into(),
            table: table.into(),
            column: column.into(),
        }
    }

    pub fn attr(&self) -> AttrRef {
        AttrRef::new(&self.alias, &self.column)
    }
}

pub(crate) fn resolve_meta(ctx: &ExecCtx, pa: &PhysAttr) -> Result<ColumnMeta> {
    Ok(ctx.catalog.require_column(&pa.table, &pa.column)?.clone())
}

// ── DataSource ──

/// Emits the dense position stream 0..row_count for one table binding, in
/// blocks of at most `ctx.block_rows` positions. Touches no pages.
pub struct DataSource {
    alias: String,
    table: String,
    next_row: u64,
    row_count: u64,
}

impl DataSource {
    pub fn new(table: &str, alias: &str) -> DataSource {
        DataSource {
            alias: alias.into(),
            table: table.into(),
            next_row: 0,
            row_count: 0,
        }
    }
}

impl OpCore for DataSource {
    fn label(&self) -> String {
        if self.alias == self.table {
            format!("DataSource {}", self.table)
        } else {
            format!("DataSource {} as {}", self.table, self.alias)
        }
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        let meta = ctx
            .catalog
            .table(&self.table)
            .ok_or_else(|| EngineError::Plan(format!("unknown table {}", self.table)))?;
        self.row_count = meta.row_count;
        self.next_row = 0;
        Ok(())
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        if self.next_row >= self.row_count {
            return Ok(None);
        }
        let end = (self.next_row + ctx.block_rows as u64).min(self.row_count);
        let positions: Vec<u64> = (self.next_row..end).collect();
        self.next_row = end;
        Ok(Some(Block::Pos(PosBlock::single(
            &pos_col_name(&self.alias),
            positions,
        ))))
    }

    fn close(&mut self, _ctx: &ExecCtx) -> Result<()> {
        Ok(())
    }
}

// ── PosFilter ──

struct BoundFilter {
    expr: BoundExpr,
    // slot i of the bound expression reads fetched column i
    cols: Vec<ColumnMeta>,
}

/// Filters a positional stream: fetches only the predicate's columns at the
/// incoming positions, keeps qualifying rows, and passes every position
/// column through unchanged and in order.
pub struct PosFilter {
    child: PlanOp,
    alias: String,
    table: String,
    pred: Expr,
    bound: Option<BoundFilter>,
}

impl PosFilter {
    pub fn new(child: PlanOp, alias: &str, table: &str, pred: Expr) -> PosFilter {
        PosFilter {
            child,
            alias: alias.into(),
            table: table.into(),
            pred,
            bound: None,
        }
    }
}

impl OpCore for PosFilter {
    fn label(&self) -> String {
        format!("Filter {}", self.pred)
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.open(ctx)?;
        let attrs = self.pred.columns();
        let mut cols = Vec::with_capacity(attrs.len());
        for a in &attrs {
            if a.table != self.alias {
                return Err(EngineError::Plan(format!(
                    "filter predicate references {} outside binding {}",
                    a, self.alias
                )));
            }
            cols.push(resolve_meta(
                ctx,
                &PhysAttr::new(&self.alias, &self.table, &a.column),
            )?);
        }
        let expr = compile(&self.pred, &|a: &AttrRef| {
            attrs.iter().position(|x| x == a)
        })?;
        self.bound = Some(BoundFilter { expr, cols });
        Ok(())
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        let bound = self
            .bound
            .as_ref()
            .ok_or_else(|| EngineError::Exec("PosFilter next before open".into()))?;
        let pos_name = pos_col_name(&self.alias);
        loop {
            let block = match self.child.next(ctx)? {
                Some(b) => b.into_pos()?,
                None => return Ok(None),
            };
            let positions = block.col(&pos_name).ok_or_else(|| {
                EngineError::Exec(format!("filter input lacks position column {pos_name}"))
            })?;
            let mut fetched: Vec<Vec<hmdb_ir::Value>> = Vec::with_capacity(bound.cols.len());
            for col in &bound.cols {
                fetched.push(read_at_positions(&ctx.pool, col, positions, ctx.sort_probe)?);
            }
            let mut keep = Vec::new();
            for i in 0..block.len {
                if bound.expr.eval_pred_with(&|slot| fetched[slot][i].clone())? {
                    keep.push(i);
                }
            }
            if keep.is_empty() {
                continue;
            }
            return Ok(Some(Block::Pos(block.gather(&keep)?)));
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}

// ── TupleFilter ──

/// Filters already-materialized rows; reads nothing from storage. The
/// predicate is bound against the child's schema on the first block.
pub struct TupleFilter {
    child: PlanOp,
    pred: Expr,
    bound: Option<BoundExpr>,
}

impl TupleFilter {
    pub fn new(child: PlanOp, pred: Expr) -> TupleFilter {
        TupleFilter {
            child,
            pred,
            bound: None,
        }
    }
}

impl OpCore for TupleFilter {
    fn label(&self) -> String {
        format!("Filter {}", self.pred)
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.open(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        loop {
            let block = match self.child.next(ctx)? {
                Some(b) => b.into_tuple()?,
                None => return Ok(None),
            };
            if self.bound.is_none() {
                self.bound = Some(compile(&self.pred, &|a: &AttrRef| {
                    block.schema.index_of(a)
                })?);
            }
            let expr = self.bound.as_ref().unwrap();
            let mut rows = Vec::new();
            for row in &block.rows {
                if expr.eval_pred_row(row)? {
                    rows.push(row.clone());
                }
            }
            if rows.is_empty() {
                continue;
            }
            return Ok(Some(Block::Tuple(TupleBlock {
                schema: block.schema,
                rows,
            })));
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}

// ── Materialize ──

/// Turns a positional stream into tuples by fetching the requested
/// attributes at the incoming positions. Output attribute order is the
/// requested order; row order follows the input.
pub struct Materialize {
    child: PlanOp,
    attrs: Vec<PhysAttr>,
    bound: Option<Vec<ColumnMeta>>,
    schema: Option<Schema>,
}

impl Materialize {
    pub fn new(child: PlanOp, attrs: Vec<PhysAttr>) -> Materialize {
        Materialize {
            child,
            attrs,
            bound: None,
            schema: None,
        }
    }
}

impl OpCore for Materialize {
    fn label(&self) -> String {
        let names: Vec<String> = self.attrs.iter().map(|a| a.attr().to_string()).collect();
        format!("Materialize [{}]", names.join(", "))
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.open(ctx)?;
        let mut cols = Vec::with_capacity(self.attrs.len());
        let mut schema = Schema::empty();
        for pa in &self.attrs {
            let meta = resolve_meta(ctx, pa)?;
            schema.push(SchemaAttr {
                attr: pa.attr(),
                vtype: meta.vtype,
            })?;
            cols.push(meta);
        }
        self.bound = Some(cols);
        self.schema = Some(schema);
        Ok(())
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        let cols = self
            .bound
            .as_ref()
            .ok_or_else(|| EngineError::Exec("Materialize next before open".into()))?;
        let schema = self.schema.clone().unwrap();
        let block = match self.child.next(ctx)? {
            Some(b) => b.into_pos()?,
            None => return Ok(None),
        };
        let mut fetched: Vec<Vec<hmdb_ir::Value>> = Vec::with_capacity(cols.len());
        for (pa, col) in self.attrs.iter().zip(cols) {
            let pos_name = pos_col_name(&pa.alias);
            let positions = block.col(&pos_name).ok_or_else(|| {
                EngineError::Exec(format!(
                    "materialize input lacks position column {pos_name}"
                ))
            })?;
            fetched.push(read_at_positions(&ctx.pool, col, positions, ctx.sort_probe)?);
        }
        let mut rows = Vec::with_capacity(block.len);
        for i in 0..block.len {
            rows.push(fetched.iter().map(|v| v[i].clone()).collect());
        }
        Ok(Some(Block::Tuple(TupleBlock { schema, rows })))
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}
