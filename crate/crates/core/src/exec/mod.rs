//! Volcano-style execution: a pull-based operator contract over blocks,
//! the shared per-query context, and the classic (non-hybrid) operators.

mod driver;
mod eval;
mod join;
mod ops;

pub use driver::run_plan;
pub use eval::{compile, BoundExpr};
pub use join::{fnv1a_values, JoinTable, PosHashJoin, PosNLJoin, TupleHashJoin};
pub use ops::{DataSource, Materialize, PhysAttr, PosFilter, TupleFilter};

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use crate::blocks::{HybridBlock, PosBlock, TupleBlock, BLOCK_CAPACITY};
use crate::storage::{BufferPool, Catalog, FetchCounters};
use crate::{EngineError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Pos(PosBlock),
    Tuple(TupleBlock),
    Hybrid(HybridBlock),
}

impl Block {
    pub fn len(&self) -> usize {
        match self {
            Block::Pos(b) => b.len,
            Block::Tuple(b) => b.rows.len(),
            Block::Hybrid(b) => b.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Block::Pos(b) => b.validate(),
            Block::Tuple(b) => b.validate(),
            Block::Hybrid(b) => b.validate(),
        }
    }

    pub fn into_pos(self) -> Result<PosBlock> {
        match self {
            Block::Pos(b) => Ok(b),
            other => Err(EngineError::Exec(format!(
                "expected a positional block, got {}",
                other.kind()
            ))),
        }
    }

    pub fn into_tuple(self) -> Result<TupleBlock> {
        match self {
            Block::Tuple(b) => Ok(b),
            other => Err(EngineError::Exec(format!(
                "expected a tuple block, got {}",
                other.kind()
            ))),
        }
    }

    pub fn into_hybrid(self) -> Result<HybridBlock> {
        match self {
            Block::Hybrid(b) => Ok(b),
            other => Err(EngineError::Exec(format!(
                "expected a hybrid block, got {}",
                other.kind()
            ))),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Block::Pos(_) => "positional",
            Block::Tuple(_) => "tuple",
            Block::Hybrid(_) => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpState {
    Created,
    Open,
    Done,
    Closed,
}

/// Per-operator output counters, indexed by operator id.
#[derive(Debug, Clone)]
pub struct OpStats {
    pub label: String,
    pub blocks_out: u64,
    pub rows_out: u64,
}

/// Shared state of one query execution: storage handles, tuning knobs, and
/// the counters that become the query's metrics. One context per query;
/// single-threaded pipelines.
pub struct ExecCtx {
    pub pool: Arc<BufferPool>,
    pub catalog: Arc<Catalog>,
    pub block_rows: usize,
    pub sort_probe: bool,
    pub mem_cap: u64,
    ht_bytes: Cell<u64>,
    ht_peak: Cell<u64>,
    ops: RefCell<Vec<OpStats>>,
    running: Cell<bool>,
    baseline: RefCell<HashMap<(u32, u32), FetchCounters>>,
    wall_ms: Cell<f64>,
}

pub const DEFAULT_MEM_CAP: u64 = 512 * 1024 * 1024;

impl ExecCtx {
    pub fn new(pool: Arc<BufferPool>, catalog: Arc<Catalog>) -> ExecCtx {
        ExecCtx {
            pool,
            catalog,
            block_rows: BLOCK_CAPACITY,
            sort_probe: false,
            mem_cap: DEFAULT_MEM_CAP,
            ht_bytes: Cell::new(0),
            ht_peak: Cell::new(0),
            ops: RefCell::new(Vec::new()),
            running: Cell::new(false),
            baseline: RefCell::new(HashMap::new()),
            wall_ms: Cell::new(0.0),
        }
    }

    pub fn register_op(&self, label: String) -> usize {
        let mut ops = self.ops.borrow_mut();
        ops.push(OpStats {
            label,
            blocks_out: 0,
            rows_out: 0,
        });
        ops.len() - 1
    }

    fn record_out(&self, op_id: usize, rows: usize) {
        let mut ops = self.ops.borrow_mut();
        ops[op_id].blocks_out += 1;
        ops[op_id].rows_out += rows as u64;
    }

    /// Reserve hash-table memory; the budget is a hard error, not a spill.
    pub fn ht_alloc(&self, bytes: u64) -> Result<()> {
        let cur = self.ht_bytes.get() + bytes;
        if cur > self.mem_cap {
            return Err(EngineError::MemoryBudget {
                needed: cur,
                cap: self.mem_cap,
            });
        }
        self.ht_bytes.set(cur);
        if cur > self.ht_peak.get() {
            self.ht_peak.set(cur);
        }
        Ok(())
    }

    pub fn ht_free(&self, bytes: u64) {
        self.ht_bytes.set(self.ht_bytes.get().saturating_sub(bytes));
    }

    pub fn begin_query(&self) {
        self.running.set(true);
        *self.baseline.borrow_mut() = self.pool.snapshot();
    }

    pub fn finish_query(&self, wall_ms: f64) {
        self.running.set(false);
        self.wall_ms.set(wall_ms);
    }

    pub fn is_running(&self) -> bool {
        self.running.get()
    }

    pub fn wall_ms(&self) -> f64 {
        self.wall_ms.get()
    }

    pub fn hashtable_bytes_peak(&self) -> u64 {
        self.ht_peak.get()
    }

    pub fn op_stats(&self) -> Vec<OpStats> {
        self.ops.borrow().clone()
    }

    /// Pool counters attributable to the current query: counters now minus
    /// the snapshot taken at `begin_query`.
    pub fn pool_delta(&self) -> HashMap<(u32, u32), FetchCounters> {
        let base = self.baseline.borrow();
        let mut now = self.pool.snapshot();
        for (key, c) in now.iter_mut() {
            if let Some(b) = base.get(key) {
                c.seq -= b.seq;
                c.rand -= b.rand;
                c.hits -= b.hits;
                c.evictions -= b.evictions;
            }
        }
        now
    }
}

/// The operator contract implemented by every physical operator.
pub trait OpCore {
    fn label(&self) -> String;
    fn open(&mut self, ctx: &ExecCtx) -> Result<()>;
    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>>;
    fn close(&mut self, ctx: &ExecCtx) -> Result<()>;
}

/// Wrapper owning an operator and enforcing the lifecycle: open before
/// next, end-of-stream is sticky, close exactly once. Also records
/// blocks_out/rows_out per operator and (in debug builds) checks block
/// alignment on everything emitted.
pub struct PlanOp {
    core: Box<dyn OpCore>,
    state: OpState,
    op_id: usize,
}

impl PlanOp {
    pub fn new(ctx: &ExecCtx, core: Box<dyn OpCore>) -> PlanOp {
        let op_id = ctx.register_op(core.label());
        PlanOp {
            core,
            state: OpState::Created,
            op_id,
        }
    }

    pub fn label(&self) -> String {
        self.core.label()
    }

    pub fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        if self.state != OpState::Created {
            return Err(EngineError::Exec(format!(
                "open on {} in state {:?}",
                self.core.label(),
                self.state
            )));
        }
        self.core.open(ctx)?;
        self.state = OpState::Open;
        Ok(())
    }

    pub fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        match self.state {
            OpState::Open => {}
            OpState::Done => return Ok(None),
            s => {
                return Err(EngineError::Exec(format!(
                    "next on {} in state {s:?}",
                    self.core.label()
                )))
            }
        }
        match self.core.next(ctx)? {
            Some(block) => {
                #[cfg(debug_assertions)]
                block.validate()?;
                ctx.record_out(self.op_id, block.len());
                Ok(Some(block))
            }
            None => {
                self.state = OpState::Done;
                Ok(None)
            }
        }
    }

    pub fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        match self.state {
            OpState::Open | OpState::Done => {
                self.core.close(ctx)?;
                self.state = OpState::Closed;
                Ok(())
            }
            s => Err(EngineError::Exec(format!(
                "close on {} in state {s:?}",
                self.core.label()
            ))),
        }
    }
}

/// How a strategy behaves on the five qualitative axes: whether predicates
/// run on columnar data, whether predicate columns can be read twice,
/// whether join inputs are read up front, whether join columns are re-read
/// afterwards, and whether probing can hit pages out of order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyTraits {
    pub fast_predicates: bool,
    pub reread_predicates: bool,
    pub preread_joins: bool,
    pub reread_joins: bool,
    pub out_of_order_probing: bool,
}

pub fn strategy_traits(kind: crate::planner::StrategyKind) -> Result<StrategyTraits> {
    use crate::planner::StrategyKind::*;
    match kind {
        Early => Ok(StrategyTraits {
            fast_predicates: false,
            reread_predicates: false,
            preread_joins: true,
            reread_joins: false,
            out_of_order_probing: false,
        }),
        Late => Ok(StrategyTraits {
            fast_predicates: true,
            reread_predicates: true,
            preread_joins: true,
            reread_joins: false,
            out_of_order_probing: false,
        }),
        UltraLate => Ok(StrategyTraits {
            fast_predicates: true,
            reread_predicates: true,
            preread_joins: false,
            reread_joins: true,
            out_of_order_probing: true,
        }),
        Hybrid => Err(EngineError::Plan(
            "per-attribute; resolved by MaterializationSchedule".into(),
        )),
    }
}
