//! Operators over hybrid blocks, where each attribute is provisioned at its
//! own point in the plan. Every operator splits into three phases: a fetch
//! phase that provisions scheduled attributes on the FULL input block
//! (before any row is dropped, so reads at a leaf stay dense), the core
//! that does the actual filtering or joining, and a combine phase that only
//! selects among position columns and already-cached values and never
//! touches storage.

mod join;
mod ops;

pub use join::{HYHashJoin, HYNestedLoopJoin};
pub use ops::{HYDataSource, HYFilter, HYMaterialize, HYProject, HYToTuple};

use hmdb_ir::{AttrRef, Value};

use crate::blocks::{pos_col_name, HybridBlock, SchemaAttr};
use crate::exec::{ExecCtx, PhysAttr};
use crate::storage::read_at_positions;
use crate::{EngineError, Result};

// ── Combine ──

/// What survives an operator: position columns by name and cached
/// attributes by reference. Combine is pure selection; anything it keeps
/// must already be present after the fetch phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CombineSpec {
    pub keep_pos: Vec<String>,
    pub keep_attrs: Vec<AttrRef>,
}

impl CombineSpec {
    pub fn apply(&self, block: &HybridBlock) -> Result<HybridBlock> {
        block.project(&self.keep_pos, &self.keep_attrs)
    }
}

/// Apply an optional combine; absent means keep everything.
pub(crate) fn combine_or_pass(
    combine: &Option<CombineSpec>,
    block: HybridBlock,
) -> Result<HybridBlock> {
    match combine {
        Some(c) => c.apply(&block),
        None => Ok(block),
    }
}

// ── Fetch ──

/// Provision `attrs` on the block: attributes already cached are left
/// alone, everything else is read from storage at the block's positions
/// and appended to the cache. This is the only phase of a hybrid operator
/// that touches storage.
pub(crate) fn provision(
    ctx: &ExecCtx,
    block: &mut HybridBlock,
    attrs: &[PhysAttr],
) -> Result<()> {
    for pa in attrs {
        let aref = pa.attr();
        if block.schema.index_of(&aref).is_some() {
            continue;
        }
        let name = pos_col_name(&pa.alias);
        let positions = block
            .pos_col(&name)
            .ok_or_else(|| {
                EngineError::Exec(format!(
                    "cannot provision {aref}: block lacks position column {name}"
                ))
            })?
            .to_vec();
        let meta = ctx.catalog.require_column(&pa.table, &pa.column)?.clone();
        let vals = read_at_positions(&ctx.pool, &meta, &positions, ctx.sort_probe)?;
        block.schema.push(SchemaAttr {
            attr: aref,
            vtype: meta.vtype,
        })?;
        if block.tuples.is_empty() {
            block.tuples = vec![Vec::new(); block.len];
        }
        for (row, v) in block.tuples.iter_mut().zip(vals) {
            row.push(v);
        }
    }
    Ok(())
}

/// Fetch `attrs` as transient column vectors without caching them on the
/// block: cached attributes are copied out, the rest are read from storage
/// at the block's positions. Page traffic is identical to `provision`.
pub(crate) fn fetch_values(
    ctx: &ExecCtx,
    block: &HybridBlock,
    attrs: &[PhysAttr],
) -> Result<Vec<Vec<Value>>> {
    let mut out = Vec::with_capacity(attrs.len());
    for pa in attrs {
        let aref = pa.attr();
        if let Some(vals) = block.attr_values(&aref) {
            out.push(vals);
            continue;
        }
        let name = pos_col_name(&pa.alias);
        let positions = block.pos_col(&name).ok_or_else(|| {
            EngineError::Exec(format!(
                "cannot fetch {aref}: block lacks position column {name}"
            ))
        })?;
        let meta = ctx.catalog.require_column(&pa.table, &pa.column)?.clone();
        out.push(read_at_positions(&ctx.pool, &meta, positions, ctx.sort_probe)?);
    }
    Ok(out)
}

// ── Specialization ──

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HYRole {
    Source,
    Filter,
    Project,
    Materialize,
    HashJoin,
    NLJoin,
    ToTuple,
}

/// Internal variant an operator runs as. All variants are observationally
/// identical in output and page traffic; they differ in what the blocks
/// and hash tables carry internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Specialization {
    /// Full mechanism: provision into blocks, joins keep build blocks
    /// buffered and store row references in the table.
    Generic,
    /// Blocks stay purely positional; fetched values are consumed
    /// transiently. Valid only when no cached attribute is used: inputs
    /// carry none and combine keeps none.
    PosOnly,
    /// No storage reads in this operator: every fetch attribute is already
    /// cached on the input, and no position column survives combine.
    TupleOnly,
    /// Hash joins only: the build side's surviving values move into the
    /// hash table payload instead of buffered blocks.
    HashJoinCombine,
}

/// Check that `requested` is admissible for an operator with the given
/// configuration. `fetch` lists the fetch attributes of both sides;
/// `cached_in` lists attributes already cached on the input blocks.
pub fn specialize(
    role: HYRole,
    requested: Specialization,
    fetch: &[PhysAttr],
    combine: &CombineSpec,
    cached_in: &[AttrRef],
) -> Result<Specialization> {
    match requested {
        Specialization::Generic => Ok(Specialization::Generic),
        Specialization::HashJoinCombine => {
            if role == HYRole::HashJoin {
                Ok(Specialization::HashJoinCombine)
            } else {
                Err(EngineError::Plan(format!(
                    "hashjoin_combine specialization on a {role:?} operator"
                )))
            }
        }
        Specialization::PosOnly => {
            if !cached_in.is_empty() {
                return Err(EngineError::Plan(
                    "pos_only specialization but the input carries cached attributes".into(),
                ));
            }
            if !combine.keep_attrs.is_empty() {
                return Err(EngineError::Plan(
                    "pos_only specialization but combine keeps cached attributes".into(),
                ));
            }
            Ok(Specialization::PosOnly)
        }
        Specialization::TupleOnly => {
            for pa in fetch {
                if !cached_in.contains(&pa.attr()) {
                    return Err(EngineError::Plan(format!(
                        "tuple_only specialization but {} would be read from storage",
                        pa.attr()
                    )));
                }
            }
            if !combine.keep_pos.is_empty() {
                return Err(EngineError::Plan(
                    "tuple_only specialization but combine keeps position columns".into(),
                ));
            }
            Ok(Specialization::TupleOnly)
        }
    }
}
