//! Hybrid joins. Both sides arrive as hybrid blocks; the fetch phase
//! provisions scheduled attributes (keys included) on full blocks before
//! the core runs, and the combine phase selects which position columns and
//! cached values survive into the output.

use std::collections::VecDeque;

use hmdb_ir::{AttrRef, Expr, Value, ValueType};

use crate::blocks::{HybridBlock, Schema, SchemaAttr};
use crate::exec::{compile, Block, BoundExpr, ExecCtx, JoinTable, OpCore, PhysAttr, PlanOp};
use crate::hybrid::{fetch_values, provision, CombineSpec, Specialization};
use crate::{EngineError, Result};

fn key_label(build: &[PhysAttr], probe: &[PhysAttr]) -> String {
    build
        .iter()
        .zip(probe)
        .map(|(b, p)| format!("{} = {}", b.attr(), p.attr()))
        .collect::<Vec<_>>()
        .join(" and ")
}

fn value_size(v: &Value) -> u64 {
    match v {
        Value::Int(_) => 8,
        Value::Str(s) => s.len() as u64,
    }
}

// Where an output column's data lives. For position columns the index is
// the source block's position column; for attributes it is the source
// block's schema slot. Packed build payloads ignore the index and are
// consumed in slot order instead.
#[derive(Debug, Clone, Copy)]
enum Side {
    Build(usize),
    Probe(usize),
}

#[derive(Debug, Clone)]
struct OutSlot<T> {
    name: T,
    side: Option<Side>,
    vtype: Option<ValueType>,
}

/// Column-wise accumulator for join output rows, flushed in blocks of at
/// most `block_rows`.
struct OutAcc {
    pos_names: Vec<String>,
    pos: Vec<Vec<u64>>,
    schema: Schema,
    vals: Vec<VecDeque<Value>>,
    len: usize,
}

impl OutAcc {
    fn new(pos_names: Vec<String>, schema: Schema) -> OutAcc {
        let npos = pos_names.len();
        let nvals = schema.len();
        OutAcc {
            pos_names,
            pos: vec![Vec::new(); npos],
            schema,
            vals: vec![VecDeque::new(); nvals],
            len: 0,
        }
    }

    fn push(&mut self, pos: Vec<u64>, vals: Vec<Value>) {
        for (col, v) in self.pos.iter_mut().zip(pos) {
            col.push(v);
        }
        for (col, v) in self.vals.iter_mut().zip(vals) {
            col.push_back(v);
        }
        self.len += 1;
    }

    fn emit(&mut self, max: usize) -> HybridBlock {
        let take = self.len.min(max);
        let pos: Vec<(String, Vec<u64>)> = self
            .pos_names
            .iter()
            .zip(self.pos.iter_mut())
            .map(|(n, col)| {
                let rest = col.split_off(take);
                (n.clone(), std::mem::replace(col, rest))
            })
            .collect();
        let mut tuples: Vec<Vec<Value>> = Vec::new();
        if !self.schema.is_empty() {
            tuples = (0..take)
                .map(|_| Vec::with_capacity(self.vals.len()))
                .collect();
            for col in self.vals.iter_mut() {
                for row in tuples.iter_mut() {
                    row.push(col.pop_front().expect("accumulator length out of sync"));
                }
            }
        }
        self.len -= take;
        HybridBlock {
            len: take,
            pos,
            schema: self.schema.clone(),
            tuples,
        }
    }
}

/// Provision one side of a join for the core: under pos_only nothing is
/// cached and the effective fetch list (scheduled attrs plus keys) is read
/// transiently; otherwise the effective list is provisioned onto the block
/// and the needed columns are copied out of the cache. Either way each
/// attribute is read from storage exactly once per block.
fn side_values(
    ctx: &ExecCtx,
    block: &mut HybridBlock,
    effective: &[PhysAttr],
    wanted: &[PhysAttr],
    transient: bool,
) -> Result<Vec<Vec<Value>>> {
    if transient {
        let all = fetch_values(ctx, block, effective)?;
        let mut out = Vec::with_capacity(wanted.len());
        for w in wanted {
            let i = effective
                .iter()
                .position(|e| e == w)
                .expect("wanted attr missing from effective fetch list");
            out.push(all[i].clone());
        }
        Ok(out)
    } else {
        provision(ctx, block, effective)?;
        fetch_values(ctx, block, wanted)
    }
}

fn effective_fetch(fetch: &[PhysAttr], keys: &[PhysAttr]) -> Vec<PhysAttr> {
    let mut out = fetch.to_vec();
    for k in keys {
        if !out.contains(k) {
            out.push(k.clone());
        }
    }
    out
}

// ── HYHashJoin ──

enum BuildStore {
    /// Build blocks stay buffered; the table stores (block, row) references
    /// and output values are gathered from the buffers at probe time.
    Refs {
        table: JoinTable<(u32, u32)>,
        blocks: Vec<HybridBlock>,
    },
    /// The build side's surviving position columns and cached values are
    /// packed into the table payload; build blocks are dropped after open.
    Packed {
        table: JoinTable<(Vec<u64>, Vec<Value>)>,
    },
}

impl BuildStore {
    fn is_empty(&self) -> bool {
        match self {
            BuildStore::Refs { table, .. } => table.is_empty(),
            BuildStore::Packed { table } => table.is_empty(),
        }
    }

    fn release(&mut self, ctx: &ExecCtx) {
        match self {
            BuildStore::Refs { table, blocks } => {
                table.release(ctx);
                blocks.clear();
            }
            BuildStore::Packed { table } => table.release(ctx),
        }
    }
}

/// Equi-join over hybrid blocks. The build side is drained at open with its
/// scheduled attributes provisioned per block; probe blocks stream through
/// the same way. An empty build side ends the stream without pulling a
/// single probe block.
pub struct HYHashJoin {
    build: PlanOp,
    probe: PlanOp,
    build_keys: Vec<PhysAttr>,
    probe_keys: Vec<PhysAttr>,
    fetch_build: Vec<PhysAttr>,
    fetch_probe: Vec<PhysAttr>,
    spec: Specialization,
    store: Option<BuildStore>,
    out_pos: Vec<OutSlot<String>>,
    out_attrs: Vec<OutSlot<AttrRef>>,
    // payload extraction indices for the packed variant, fixed on the
    // first build block
    packed_pos_idx: Vec<usize>,
    packed_attr_idx: Vec<usize>,
    acc: Option<OutAcc>,
    input_done: bool,
}

impl HYHashJoin {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        build: PlanOp,
        probe: PlanOp,
        build_keys: Vec<PhysAttr>,
        probe_keys: Vec<PhysAttr>,
        fetch_build: Vec<PhysAttr>,
        fetch_probe: Vec<PhysAttr>,
        combine: CombineSpec,
        spec: Specialization,
    ) -> HYHashJoin {
        assert_eq!(build_keys.len(), probe_keys.len());
        let out_pos = combine
            .keep_pos
            .iter()
            .map(|n| OutSlot {
                name: n.clone(),
                side: None,
                vtype: None,
            })
            .collect();
        let out_attrs = combine
            .keep_attrs
            .iter()
            .map(|a| OutSlot {
                name: a.clone(),
                side: None,
                vtype: None,
            })
            .collect();
        HYHashJoin {
            build,
            probe,
            build_keys,
            probe_keys,
            fetch_build,
            fetch_probe,
            spec,
            store: None,
            out_pos,
            out_attrs,
            packed_pos_idx: Vec::new(),
            packed_attr_idx: Vec::new(),
            acc: None,
            input_done: false,
        }
    }
}

impl OpCore for HYHashJoin {
    fn label(&self) -> String {
        format!(
            "HYHashJoin {}",
            key_label(&self.build_keys, &self.probe_keys)
        )
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.build.open(ctx)?;
        self.probe.open(ctx)?;

        let mut store = if self.spec == Specialization::HashJoinCombine {
            BuildStore::Packed {
                table: JoinTable::new(),
            }
        } else {
            BuildStore::Refs {
                table: JoinTable::new(),
                blocks: Vec::new(),
            }
        };

        let effective = effective_fetch(&self.fetch_build, &self.build_keys);
        let transient = self.spec == Specialization::PosOnly;
        let mut resolved = false;
        while let Some(block) = self.build.next(ctx)? {
            let mut block = block.into_hybrid()?;
            let keyvals = side_values(ctx, &mut block, &effective, &self.build_keys, transient)?;
            if !resolved {
                // claim the combine slots this side can serve
                for slot in self.out_pos.iter_mut() {
                    if let Some(i) = block.pos.iter().position(|(n, _)| n == &slot.name) {
                        slot.side = Some(Side::Build(i));
                    }
                }
                for slot in self.out_attrs.iter_mut() {
                    if let Some(i) = block.schema.index_of(&slot.name) {
                        slot.side = Some(Side::Build(i));
                        slot.vtype = Some(block.schema.attrs()[i].vtype);
                    }
                }
                self.packed_pos_idx = self
                    .out_pos
                    .iter()
                    .filter_map(|s| match s.side {
                        Some(Side::Build(i)) => Some(i),
                        _ => None,
                    })
                    .collect();
                self.packed_attr_idx = self
                    .out_attrs
                    .iter()
                    .filter_map(|s| match s.side {
                        Some(Side::Build(i)) => Some(i),
                        _ => None,
                    })
                    .collect();
                resolved = true;
            }
            match &mut store {
                BuildStore::Packed { table } => {
                    for i in 0..block.len {
                        let key: Vec<Value> = keyvals.iter().map(|v| v[i].clone()).collect();
                        let pos: Vec<u64> = self
                            .packed_pos_idx
                            .iter()
                            .map(|&c| block.pos[c].1[i])
                            .collect();
                        let vals: Vec<Value> = self
                            .packed_attr_idx
                            .iter()
                            .map(|&c| block.tuples[i][c].clone())
                            .collect();
                        let bytes =
                            8 * pos.len() as u64 + vals.iter().map(value_size).sum::<u64>();
                        table.insert(ctx, key, (pos, vals), bytes)?;
                    }
                }
                BuildStore::Refs { table, blocks } => {
                    let bi = blocks.len() as u32;
                    for i in 0..block.len {
                        let key: Vec<Value> = keyvals.iter().map(|v| v[i].clone()).collect();
                        table.insert(ctx, key, (bi, i as u32), 8)?;
                    }
                    blocks.push(block);
                }
            }
        }
        self.store = Some(store);
        self.build.close(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        match &self.store {
            Some(s) if !s.is_empty() => {}
            Some(_) => return Ok(None),
            None => return Err(EngineError::Exec("join next before open".into())),
        }
        let effective = effective_fetch(&self.fetch_probe, &self.probe_keys);
        let transient = self.spec == Specialization::PosOnly;
        loop {
            if let Some(acc) = self.acc.as_mut() {
                if acc.len >= ctx.block_rows || (self.input_done && acc.len > 0) {
                    return Ok(Some(Block::Hybrid(acc.emit(ctx.block_rows))));
                }
            }
            if self.input_done {
                return Ok(None);
            }
            let mut block = match self.probe.next(ctx)? {
                Some(b) => b.into_hybrid()?,
                None => {
                    self.input_done = true;
                    continue;
                }
            };
            let keyvals = side_values(ctx, &mut block, &effective, &self.probe_keys, transient)?;
            if self.acc.is_none() {
                // fill the remaining combine slots from the probe side
                for slot in self.out_pos.iter_mut() {
                    if slot.side.is_none() {
                        match block.pos.iter().position(|(n, _)| n == &slot.name) {
                            Some(i) => slot.side = Some(Side::Probe(i)),
                            None => {
                                return Err(EngineError::Exec(format!(
                                    "combine keeps position column {} which neither side provides",
                                    slot.name
                                )))
                            }
                        }
                    }
                }
                let mut schema = Schema::empty();
                for slot in self.out_attrs.iter_mut() {
                    if slot.side.is_none() {
                        match block.schema.index_of(&slot.name) {
                            Some(i) => {
                                slot.side = Some(Side::Probe(i));
                                slot.vtype = Some(block.schema.attrs()[i].vtype);
                            }
                            None => {
                                return Err(EngineError::Exec(format!(
                                    "combine keeps attribute {} which neither side provides",
                                    slot.name
                                )))
                            }
                        }
                    }
                    schema.push(SchemaAttr {
                        attr: slot.name.clone(),
                        vtype: slot.vtype.expect("slot type fixed at resolution"),
                    })?;
                }
                let names: Vec<String> = self.out_pos.iter().map(|s| s.name.clone()).collect();
                self.acc = Some(OutAcc::new(names, schema));
            }

            let acc = self.acc.as_mut().unwrap();
            let store = self.store.as_ref().unwrap();
            for i in 0..block.len {
                let key: Vec<Value> = keyvals.iter().map(|v| v[i].clone()).collect();
                match store {
                    BuildStore::Packed { table } => {
                        let matches = match table.lookup(&key) {
                            Some(m) => m,
                            None => continue,
                        };
                        for (bpos, bvals) in matches {
                            let mut bp = bpos.iter().copied();
                            let mut bv = bvals.iter().cloned();
                            let pos: Vec<u64> = self
                                .out_pos
                                .iter()
                                .map(|s| match s.side.unwrap() {
                                    Side::Build(_) => bp.next().expect("payload width"),
                                    Side::Probe(c) => block.pos[c].1[i],
                                })
                                .collect();
                            let vals: Vec<Value> = self
                                .out_attrs
                                .iter()
                                .map(|s| match s.side.unwrap() {
                                    Side::Build(_) => bv.next().expect("payload width"),
                                    Side::Probe(c) => block.tuples[i][c].clone(),
                                })
                                .collect();
                            acc.push(pos, vals);
                        }
                    }
                    BuildStore::Refs { table, blocks } => {
                        let matches = match table.lookup(&key) {
                            Some(m) => m,
                            None => continue,
                        };
                        for &(bi, bri) in matches {
                            let bblock = &blocks[bi as usize];
                            let bri = bri as usize;
                            let pos: Vec<u64> = self
                                .out_pos
                                .iter()
                                .map(|s| match s.side.unwrap() {
                                    Side::Build(c) => bblock.pos[c].1[bri],
                                    Side::Probe(c) => block.pos[c].1[i],
                                })
                                .collect();
                            let vals: Vec<Value> = self
                                .out_attrs
                                .iter()
                                .map(|s| match s.side.unwrap() {
                                    Side::Build(c) => bblock.tuples[bri][c].clone(),
                                    Side::Probe(c) => block.tuples[i][c].clone(),
                                })
                                .collect();
                            acc.push(pos, vals);
                        }
                    }
                }
            }
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        if let Some(store) = self.store.as_mut() {
            store.release(ctx);
        }
        self.probe.close(ctx)
    }
}

// ── HYNestedLoopJoin ──

/// Nested-loop join over hybrid blocks for arbitrary predicates. The left
/// side is buffered whole at open with its scheduled attributes
/// provisioned; right blocks stream, and for each right row every left row
/// is tested in order, so output order follows the right stream.
pub struct HYNestedLoopJoin {
    left: PlanOp,
    right: PlanOp,
    pred: Expr,
    pred_left: Vec<PhysAttr>,
    pred_right: Vec<PhysAttr>,
    fetch_left: Vec<PhysAttr>,
    fetch_right: Vec<PhysAttr>,
    spec: Specialization,
    bound: Option<BoundExpr>,
    left_blocks: Vec<HybridBlock>,
    left_offsets: Vec<usize>,
    left_len: usize,
    left_vals: Vec<Vec<Value>>,
    out_pos: Vec<OutSlot<String>>,
    out_attrs: Vec<OutSlot<AttrRef>>,
    acc: Option<OutAcc>,
    input_done: bool,
}

impl HYNestedLoopJoin {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        left: PlanOp,
        right: PlanOp,
        pred: Expr,
        pred_left: Vec<PhysAttr>,
        pred_right: Vec<PhysAttr>,
        fetch_left: Vec<PhysAttr>,
        fetch_right: Vec<PhysAttr>,
        combine: CombineSpec,
        spec: Specialization,
    ) -> HYNestedLoopJoin {
        let out_pos = combine
            .keep_pos
            .iter()
            .map(|n| OutSlot {
                name: n.clone(),
                side: None,
                vtype: None,
            })
            .collect();
        let out_attrs = combine
            .keep_attrs
            .iter()
            .map(|a| OutSlot {
                name: a.clone(),
                side: None,
                vtype: None,
            })
            .collect();
        HYNestedLoopJoin {
            left,
            right,
            pred,
            pred_left,
            pred_right,
            fetch_left,
            fetch_right,
            spec,
            bound: None,
            left_blocks: Vec::new(),
            left_offsets: Vec::new(),
            left_len: 0,
            left_vals: Vec::new(),
            out_pos,
            out_attrs,
            acc: None,
            input_done: false,
        }
    }

    fn locate(&self, global: usize) -> (usize, usize) {
        // offsets hold each block's first global row index
        let bi = match self.left_offsets.binary_search(&global) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (bi, global - self.left_offsets[bi])
    }
}

impl OpCore for HYNestedLoopJoin {
    fn label(&self) -> String {
        format!("HYNestedLoopJoin {}", self.pred)
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.left.open(ctx)?;
        self.right.open(ctx)?;
        let left_attrs = self.pred_left.clone();
        let right_attrs = self.pred_right.clone();
        self.bound = Some(compile(&self.pred, &|a: &AttrRef| {
            left_attrs
                .iter()
                .position(|pa| &pa.attr() == a)
                .or_else(|| {
                    right_attrs
                        .iter()
                        .position(|pa| &pa.attr() == a)
                        .map(|i| i + left_attrs.len())
                })
        })?);

        let transient = self.spec == Specialization::PosOnly;
        let effective = effective_fetch(&self.fetch_left, &self.pred_left);
        let mut partials: Vec<Vec<Vec<Value>>> = Vec::new();
        while let Some(block) = self.left.next(ctx)? {
            let mut block = block.into_hybrid()?;
            partials.push(side_values(
                ctx,
                &mut block,
                &effective,
                &self.pred_left,
                transient,
            )?);
            self.left_offsets.push(self.left_len);
            self.left_len += block.len;
            self.left_blocks.push(block);
        }
        // concatenate the per-block predicate columns
        self.left_vals = vec![Vec::with_capacity(self.left_len); self.pred_left.len()];
        for part in partials {
            for (acc, col) in self.left_vals.iter_mut().zip(part) {
                acc.extend(col);
            }
        }
        if let Some(first) = self.left_blocks.first() {
            for slot in self.out_pos.iter_mut() {
                if let Some(i) = first.pos.iter().position(|(n, _)| n == &slot.name) {
                    slot.side = Some(Side::Build(i));
                }
            }
            for slot in self.out_attrs.iter_mut() {
                if let Some(i) = first.schema.index_of(&slot.name) {
                    slot.side = Some(Side::Build(i));
                    slot.vtype = Some(first.schema.attrs()[i].vtype);
                }
            }
        }
        self.left.close(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        if self.left_len == 0 {
            return Ok(None);
        }
        let transient = self.spec == Specialization::PosOnly;
        let effective = effective_fetch(&self.fetch_right, &self.pred_right);
        loop {
            if let Some(acc) = self.acc.as_mut() {
                if acc.len >= ctx.block_rows || (self.input_done && acc.len > 0) {
                    return Ok(Some(Block::Hybrid(acc.emit(ctx.block_rows))));
                }
            }
            if self.input_done {
                return Ok(None);
            }
            let mut block = match self.right.next(ctx)? {
                Some(b) => b.into_hybrid()?,
                None => {
                    self.input_done = true;
                    continue;
                }
            };
            let right_vals =
                side_values(ctx, &mut block, &effective, &self.pred_right, transient)?;
            if self.acc.is_none() {
                for slot in self.out_pos.iter_mut() {
                    if slot.side.is_none() {
                        match block.pos.iter().position(|(n, _)| n == &slot.name) {
                            Some(i) => slot.side = Some(Side::Probe(i)),
                            None => {
                                return Err(EngineError::Exec(format!(
                                    "combine keeps position column {} which neither side provides",
                                    slot.name
                                )))
                            }
                        }
                    }
                }
                let mut schema = Schema::empty();
                for slot in self.out_attrs.iter_mut() {
                    if slot.side.is_none() {
                        match block.schema.index_of(&slot.name) {
                            Some(i) => {
                                slot.side = Some(Side::Probe(i));
                                slot.vtype = Some(block.schema.attrs()[i].vtype);
                            }
                            None => {
                                return Err(EngineError::Exec(format!(
                                    "combine keeps attribute {} which neither side provides",
                                    slot.name
                                )))
                            }
                        }
                    }
                    schema.push(SchemaAttr {
                        attr: slot.name.clone(),
                        vtype: slot.vtype.expect("slot type fixed at resolution"),
                    })?;
                }
                let names: Vec<String> = self.out_pos.iter().map(|s| s.name.clone()).collect();
                self.acc = Some(OutAcc::new(names, schema));
            }

            let expr = self.bound.as_ref().unwrap();
            let nleft = self.pred_left.len();
            for j in 0..block.len {
                for i in 0..self.left_len {
                    let hit = expr.eval_pred_with(&|slot| {
                        if slot < nleft {
                            self.left_vals[slot][i].clone()
                        } else {
                            right_vals[slot - nleft][j].clone()
                        }
                    })?;
                    if !hit {
                        continue;
                    }
                    let (bi, bri) = self.locate(i);
                    let lblock = &self.left_blocks[bi];
                    let pos: Vec<u64> = self
                        .out_pos
                        .iter()
                        .map(|s| match s.side.unwrap() {
                            Side::Build(c) => lblock.pos[c].1[bri],
                            Side::Probe(c) => block.pos[c].1[j],
                        })
                        .collect();
                    let vals: Vec<Value> = self
                        .out_attrs
                        .iter()
                        .map(|s| match s.side.unwrap() {
                            Side::Build(c) => lblock.tuples[bri][c].clone(),
                            Side::Probe(c) => block.tuples[j][c].clone(),
                        })
                        .collect();
                    self.acc.as_mut().unwrap().push(pos, vals);
                }
            }
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.right.close(ctx)
    }
}
