//! Unary hybrid operators: source, filter, projection, materialization,
//! and the adapter that hands finished tuples to the driver.

use hmdb_ir::{AttrRef, Expr};

use crate::blocks::{pos_col_name, HybridBlock, Schema, TupleBlock};
use crate::exec::{compile, Block, BoundExpr, ExecCtx, OpCore, PhysAttr, PlanOp};
use crate::hybrid::{combine_or_pass, fetch_values, provision, CombineSpec, Specialization};
use crate::{EngineError, Result};

// ── HYDataSource ──

/// Dense position scan over one table binding. Attributes scheduled at the
/// source are provisioned here, while the positions are still 0..n chunks,
/// so those reads are sequential by construction.
pub struct HYDataSource {
    alias: String,
    table: String,
    fetch: Vec<PhysAttr>,
    next_row: u64,
    row_count: u64,
}

impl HYDataSource {
    pub fn new(table: &str, alias: &str, fetch: Vec<PhysAttr>) -> HYDataSource {
        HYDataSource {
            alias: alias.into(),
            table: table.into(),
            fetch,
            next_row: 0,
            row_count: 0,
        }
    }
}

impl OpCore for HYDataSource {
    fn label(&self) -> String {
        if self.alias == self.table {
            format!("HYDataSource {}", self.table)
        } else {
            format!("HYDataSource {} as {}", self.table, self.alias)
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
        let mut block = HybridBlock {
            len: positions.len(),
            pos: vec![(pos_col_name(&self.alias), positions)],
            schema: Schema::empty(),
            tuples: Vec::new(),
        };
        provision(ctx, &mut block, &self.fetch)?;
        Ok(Some(Block::Hybrid(block)))
    }

    fn close(&mut self, _ctx: &ExecCtx) -> Result<()> {
        Ok(())
    }
}

// ── HYFilter ──

/// Filter with scheduled provisioning: the fetch phase provisions the
/// predicate's attributes (and anything else scheduled here) on the full
/// input block, the core keeps qualifying rows, and combine projects the
/// survivors. Under the pos_only specialization predicate values are
/// consumed transiently and the blocks stay purely positional.
pub struct HYFilter {
    child: PlanOp,
    pred: Expr,
    fetch: Vec<PhysAttr>,
    combine: Option<CombineSpec>,
    spec: Specialization,
    bound: Option<BoundExpr>,
    pred_attrs: Vec<PhysAttr>,
}

impl HYFilter {
    pub fn new(
        child: PlanOp,
        pred: Expr,
        fetch: Vec<PhysAttr>,
        combine: Option<CombineSpec>,
        spec: Specialization,
    ) -> HYFilter {
        HYFilter {
            child,
            pred,
            fetch,
            combine,
            spec,
            bound: None,
            pred_attrs: Vec::new(),
        }
    }
}

impl OpCore for HYFilter {
    fn label(&self) -> String {
        format!("HYFilter {}", self.pred)
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        // Every predicate attribute must be provisionable: either it is in
        // this operator's fetch list or it arrives cached from below. The
        // fetch list carries the physical binding for both cases.
        for a in self.pred.columns() {
            match self.fetch.iter().find(|pa| pa.attr() == a) {
                Some(pa) => self.pred_attrs.push(pa.clone()),
                None => {
                    return Err(EngineError::Plan(format!(
                        "filter predicate attribute {a} missing from fetch list"
                    )))
                }
            }
        }
        self.child.open(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        loop {
            let mut block = match self.child.next(ctx)? {
                Some(b) => b.into_hybrid()?,
                None => return Ok(None),
            };
            let keep: Vec<usize> = if self.spec == Specialization::PosOnly {
                let vals = fetch_values(ctx, &block, &self.pred_attrs)?;
                if self.bound.is_none() {
                    let attrs: Vec<AttrRef> =
                        self.pred_attrs.iter().map(|pa| pa.attr()).collect();
                    self.bound = Some(compile(&self.pred, &|a| {
                        attrs.iter().position(|x| x == a)
                    })?);
                }
                let expr = self.bound.as_ref().unwrap();
                let mut keep = Vec::new();
                for i in 0..block.len {
                    if expr.eval_pred_with(&|slot| vals[slot][i].clone())? {
                        keep.push(i);
                    }
                }
                keep
            } else {
                provision(ctx, &mut block, &self.fetch)?;
                if self.bound.is_none() {
                    self.bound = Some(compile(&self.pred, &|a| block.schema.index_of(a))?);
                }
                let expr = self.bound.as_ref().unwrap();
                let mut keep = Vec::new();
                for i in 0..block.len {
                    if expr.eval_pred_row(&block.tuples[i])? {
                        keep.push(i);
                    }
                }
                keep
            };
            if keep.is_empty() {
                continue;
            }
            let out = combine_or_pass(&self.combine, block.gather(&keep)?)?;
            return Ok(Some(Block::Hybrid(out)));
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}

// ── HYProject ──

/// A standalone combine phase: narrows blocks to the kept position columns
/// and cached attributes. Never reads storage.
pub struct HYProject {
    child: PlanOp,
    combine: CombineSpec,
}

impl HYProject {
    pub fn new(child: PlanOp, combine: CombineSpec) -> HYProject {
        HYProject { child, combine }
    }
}

impl OpCore for HYProject {
    fn label(&self) -> String {
        let mut parts: Vec<String> = self.combine.keep_pos.clone();
        parts.extend(self.combine.keep_attrs.iter().map(|a| a.to_string()));
        format!("HYProject [{}]", parts.join(", "))
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.open(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        match self.child.next(ctx)? {
            Some(b) => Ok(Some(Block::Hybrid(self.combine.apply(&b.into_hybrid()?)?))),
            None => Ok(None),
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}

// ── HYMaterialize ──

/// Provisions the listed attributes and drops everything combine does not
/// keep; used for attributes scheduled at the top of the plan.
pub struct HYMaterialize {
    child: PlanOp,
    fetch: Vec<PhysAttr>,
    combine: Option<CombineSpec>,
}

impl HYMaterialize {
    pub fn new(
        child: PlanOp,
        fetch: Vec<PhysAttr>,
        combine: Option<CombineSpec>,
    ) -> HYMaterialize {
        HYMaterialize {
            child,
            fetch,
            combine,
        }
    }
}

impl OpCore for HYMaterialize {
    fn label(&self) -> String {
        let names: Vec<String> = self.fetch.iter().map(|pa| pa.attr().to_string()).collect();
        format!("HYMaterialize [{}]", names.join(", "))
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.open(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        match self.child.next(ctx)? {
            Some(b) => {
                let mut block = b.into_hybrid()?;
                provision(ctx, &mut block, &self.fetch)?;
                Ok(Some(Block::Hybrid(combine_or_pass(&self.combine, block)?)))
            }
            None => Ok(None),
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}

// ── HYToTuple ──

/// Adapter from hybrid blocks to plain tuples for the driver. Pure
/// selection over cached values: an attribute that was never provisioned
/// below is an error, not a read.
pub struct HYToTuple {
    child: PlanOp,
    attrs: Vec<AttrRef>,
    schema: Option<Schema>,
}

impl HYToTuple {
    pub fn new(child: PlanOp, attrs: Vec<AttrRef>) -> HYToTuple {
        HYToTuple {
            child,
            attrs,
            schema: None,
        }
    }
}

impl OpCore for HYToTuple {
    fn label(&self) -> String {
        "HYToTuple".into()
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.open(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        let block = match self.child.next(ctx)? {
            Some(b) => b.into_hybrid()?,
            None => return Ok(None),
        };
        let mut idx = Vec::with_capacity(self.attrs.len());
        for a in &self.attrs {
            match block.schema.index_of(a) {
                Some(i) => idx.push(i),
                None => {
                    return Err(EngineError::Exec(format!(
                        "attribute {a} is not materialized at the top of the plan"
                    )))
                }
            }
        }
        if self.schema.is_none() {
            let mut schema = Schema::empty();
            for &i in &idx {
                schema.push(block.schema.attrs()[i].clone())?;
            }
            self.schema = Some(schema);
        }
        let rows: Vec<Vec<hmdb_ir::Value>> = block
            .tuples
            .iter()
            .map(|row| idx.iter().map(|&i| row[i].clone()).collect())
            .collect();
        Ok(Some(Block::Tuple(TupleBlock {
            schema: self.schema.clone().unwrap(),
            rows,
        })))
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.child.close(ctx)
    }
}
