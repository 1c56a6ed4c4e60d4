//! Join operators. Hash joins drain their build side at open; nested loops
//! buffer the left side and stream the right. All variants preserve the
//! streamed side's row order.

use std::collections::VecDeque;

use hmdb_ir::{AttrRef, Expr, Value};

use crate::blocks::{pos_col_name, PosBlock, Schema, TupleBlock};
use crate::exec::eval::{compile, BoundExpr};
use crate::exec::ops::{resolve_meta, PhysAttr};
use crate::exec::{Block, ExecCtx, OpCore, PlanOp};
use crate::storage::read_at_positions;
use crate::{EngineError, Result};

// ── Hash table ──

const FNV_BASIS: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over the byte encoding of a composite key. String components are
/// terminated with a 0xff byte so adjacent strings cannot alias.
pub fn fnv1a_values(key: &[Value]) -> u64 {
    let mut h = FNV_BASIS;
    let mut step = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    };
    for v in key {
        match v {
            Value::Int(x) => {
                for b in x.to_le_bytes() {
                    step(b);
                }
            }
            Value::Str(s) => {
                for b in s.as_bytes() {
                    step(*b);
                }
                step(0xff);
            }
        }
    }
    h
}

fn value_bytes(v: &Value) -> u64 {
    match v {
        Value::Int(_) => 8,
        Value::Str(s) => s.len() as u64,
    }
}

fn row_bytes(row: &[Value]) -> u64 {
    row.iter().map(value_bytes).sum()
}

// Fixed per-entry bookkeeping charge on top of key and payload bytes.
const ENTRY_OVERHEAD: u64 = 32;

/// Chained hash table keyed by composite values. Payloads with equal keys
/// share a group and keep insertion order. Memory is charged to the query
/// context per entry (key bytes + payload bytes + overhead); exceeding the
/// budget is an error, there is no spill path.
pub struct JoinTable<P> {
    buckets: Vec<Vec<(u64, u32)>>,
    groups: Vec<(Vec<Value>, Vec<P>)>,
    bytes: u64,
    entries: usize,
}

impl<P> JoinTable<P> {
    pub fn new() -> JoinTable<P> {
        JoinTable {
            buckets: vec![Vec::new(); 16],
            groups: Vec::new(),
            bytes: 0,
            entries: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    pub fn entries(&self) -> usize {
        self.entries
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn insert(
        &mut self,
        ctx: &ExecCtx,
        key: Vec<Value>,
        payload: P,
        payload_bytes: u64,
    ) -> Result<()> {
        let delta = row_bytes(&key) + payload_bytes + ENTRY_OVERHEAD;
        ctx.ht_alloc(delta)?;
        self.bytes += delta;
        let h = fnv1a_values(&key);
        let slot = (h as usize) & (self.buckets.len() - 1);
        let group = self.buckets[slot]
            .iter()
            .find(|(bh, gi)| *bh == h && self.groups[*gi as usize].0 == key)
            .map(|(_, gi)| *gi);
        match group {
            Some(gi) => self.groups[gi as usize].1.push(payload),
            None => {
                let gi = self.groups.len() as u32;
                self.groups.push((key, vec![payload]));
                self.buckets[slot].push((h, gi));
                if self.groups.len() > self.buckets.len() * 2 {
                    self.grow();
                }
            }
        }
        self.entries += 1;
        Ok(())
    }

    fn grow(&mut self) {
        let new_len = self.buckets.len() * 2;
        let mut buckets = vec![Vec::new(); new_len];
        for bucket in &self.buckets {
            for &(h, gi) in bucket {
                buckets[(h as usize) & (new_len - 1)].push((h, gi));
            }
        }
        self.buckets = buckets;
    }

    pub fn lookup(&self, key: &[Value]) -> Option<&[P]> {
        let h = fnv1a_values(key);
        let slot = (h as usize) & (self.buckets.len() - 1);
        self.buckets[slot]
            .iter()
            .find(|(bh, gi)| *bh == h && self.groups[*gi as usize].0 == key)
            .map(|(_, gi)| self.groups[*gi as usize].1.as_slice())
    }

    /// Return the reserved bytes to the query context. Call once, on close.
    pub fn release(&mut self, ctx: &ExecCtx) {
        ctx.ht_free(self.bytes);
        self.bytes = 0;
        self.buckets.clear();
        self.groups.clear();
        self.entries = 0;
    }
}

fn key_display(pairs: &[(AttrRef, AttrRef)]) -> String {
    pairs
        .iter()
        .map(|(l, r)| format!("{l} = {r}"))
        .collect::<Vec<_>>()
        .join(" and ")
}

// ── TupleHashJoin ──

/// Equi-join over materialized rows. The build side is drained into the
/// hash table at open; probe rows stream through and each match emits the
/// build row followed by the probe row. Matches within a key group come out
/// in build insertion order; probe row order is preserved.
pub struct TupleHashJoin {
    build: PlanOp,
    probe: PlanOp,
    // key pairs oriented (build attr, probe attr)
    keys: Vec<(AttrRef, AttrRef)>,
    table: JoinTable<Vec<Value>>,
    out_schema: Option<Schema>,
    build_schema: Option<Schema>,
    probe_keys: Option<Vec<usize>>,
    pending: VecDeque<Vec<Value>>,
    input_done: bool,
}

impl TupleHashJoin {
    pub fn new(build: PlanOp, probe: PlanOp, keys: Vec<(AttrRef, AttrRef)>) -> TupleHashJoin {
        TupleHashJoin {
            build,
            probe,
            keys,
            table: JoinTable::new(),
            out_schema: None,
            build_schema: None,
            probe_keys: None,
            pending: VecDeque::new(),
            input_done: false,
        }
    }
}

impl OpCore for TupleHashJoin {
    fn label(&self) -> String {
        format!("HashJoin {}", key_display(&self.keys))
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.build.open(ctx)?;
        self.probe.open(ctx)?;
        let mut key_idx: Option<Vec<usize>> = None;
        while let Some(block) = self.build.next(ctx)? {
            let block = block.into_tuple()?;
            if key_idx.is_none() {
                let mut idx = Vec::with_capacity(self.keys.len());
                for (b, _) in &self.keys {
                    idx.push(block.schema.index_of(b).ok_or_else(|| {
                        EngineError::Exec(format!("build side lacks key attribute {b}"))
                    })?);
                }
                key_idx = Some(idx);
                self.build_schema = Some(block.schema.clone());
            }
            let idx = key_idx.as_ref().unwrap();
            for row in block.rows {
                let key: Vec<Value> = idx.iter().map(|&i| row[i].clone()).collect();
                let bytes = row_bytes(&row);
                self.table.insert(ctx, key, row, bytes)?;
            }
        }
        self.build.close(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        if self.table.is_empty() {
            return Ok(None);
        }
        loop {
            if self.pending.len() >= ctx.block_rows
                || (self.input_done && !self.pending.is_empty())
            {
                let take = self.pending.len().min(ctx.block_rows);
                let rows: Vec<Vec<Value>> = self.pending.drain(..take).collect();
                return Ok(Some(Block::Tuple(TupleBlock {
                    schema: self.out_schema.clone().unwrap(),
                    rows,
                })));
            }
            if self.input_done {
                return Ok(None);
            }
            let block = match self.probe.next(ctx)? {
                Some(b) => b.into_tuple()?,
                None => {
                    self.input_done = true;
                    continue;
                }
            };
            if self.probe_keys.is_none() {
                let mut idx = Vec::with_capacity(self.keys.len());
                for (_, p) in &self.keys {
                    idx.push(block.schema.index_of(p).ok_or_else(|| {
                        EngineError::Exec(format!("probe side lacks key attribute {p}"))
                    })?);
                }
                self.probe_keys = Some(idx);
                self.out_schema =
                    Some(self.build_schema.as_ref().unwrap().concat(&block.schema)?);
            }
            let idx = self.probe_keys.as_ref().unwrap();
            for row in &block.rows {
                let key: Vec<Value> = idx.iter().map(|&i| row[i].clone()).collect();
                if let Some(matches) = self.table.lookup(&key) {
                    for build_row in matches {
                        let mut out = build_row.clone();
                        out.extend(row.iter().cloned());
                        self.pending.push_back(out);
                    }
                }
            }
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.table.release(ctx);
        self.probe.close(ctx)
    }
}

// ── PosHashJoin ──

fn pos_row(cols: &[(String, Vec<u64>)], i: usize) -> Vec<u64> {
    cols.iter().map(|(_, v)| v[i]).collect()
}

/// Equi-join over positional streams. Key values are fetched from storage
/// on both sides; the table stores the build side's position row per entry,
/// and each match emits the union of both sides' position columns. An empty
/// build side ends the stream without touching the probe side.
pub struct PosHashJoin {
    build: PlanOp,
    probe: PlanOp,
    build_keys: Vec<PhysAttr>,
    probe_keys: Vec<PhysAttr>,
    table: JoinTable<Vec<u64>>,
    build_names: Vec<String>,
    out_names: Vec<String>,
    pending: VecDeque<Vec<u64>>,
    input_done: bool,
}

impl PosHashJoin {
    pub fn new(
        build: PlanOp,
        probe: PlanOp,
        build_keys: Vec<PhysAttr>,
        probe_keys: Vec<PhysAttr>,
    ) -> PosHashJoin {
        assert_eq!(build_keys.len(), probe_keys.len());
        PosHashJoin {
            build,
            probe,
            build_keys,
            probe_keys,
            table: JoinTable::new(),
            build_names: Vec::new(),
            out_names: Vec::new(),
            pending: VecDeque::new(),
            input_done: false,
        }
    }

    fn fetch_keys(
        ctx: &ExecCtx,
        keys: &[PhysAttr],
        block: &PosBlock,
    ) -> Result<Vec<Vec<Value>>> {
        let mut out = Vec::with_capacity(keys.len());
        for pa in keys {
            let name = pos_col_name(&pa.alias);
            let positions = block.col(&name).ok_or_else(|| {
                EngineError::Exec(format!("join input lacks position column {name}"))
            })?;
            let meta = resolve_meta(ctx, pa)?;
            out.push(read_at_positions(&ctx.pool, &meta, positions, ctx.sort_probe)?);
        }
        Ok(out)
    }

    fn emit(&mut self, max: usize) -> PosBlock {
        let take = self.pending.len().min(max);
        let rows: Vec<Vec<u64>> = self.pending.drain(..take).collect();
        let mut cols: Vec<(String, Vec<u64>)> = self
            .out_names
            .iter()
            .map(|n| (n.clone(), Vec::with_capacity(take)))
            .collect();
        for row in rows {
            for (c, v) in cols.iter_mut().zip(row) {
                c.1.push(v);
            }
        }
        PosBlock { len: take, cols }
    }
}

impl OpCore for PosHashJoin {
    fn label(&self) -> String {
        let pairs: Vec<(AttrRef, AttrRef)> = self
            .build_keys
            .iter()
            .zip(&self.probe_keys)
            .map(|(b, p)| (b.attr(), p.attr()))
            .collect();
        format!("HashJoin {}", key_display(&pairs))
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.build.open(ctx)?;
        self.probe.open(ctx)?;
        while let Some(block) = self.build.next(ctx)? {
            let block = block.into_pos()?;
            if self.build_names.is_empty() {
                self.build_names = block.cols.iter().map(|(n, _)| n.clone()).collect();
            }
            let keyvals = Self::fetch_keys(ctx, &self.build_keys, &block)?;
            let width = block.cols.len() as u64;
            for i in 0..block.len {
                let key: Vec<Value> = keyvals.iter().map(|v| v[i].clone()).collect();
                self.table.insert(ctx, key, pos_row(&block.cols, i), 8 * width)?;
            }
        }
        self.build.close(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        if self.table.is_empty() {
            return Ok(None);
        }
        loop {
            if self.pending.len() >= ctx.block_rows
                || (self.input_done && !self.pending.is_empty())
            {
                let block = self.emit(ctx.block_rows);
                return Ok(Some(Block::Pos(block)));
            }
            if self.input_done {
                return Ok(None);
            }
            let block = match self.probe.next(ctx)? {
                Some(b) => b.into_pos()?,
                None => {
                    self.input_done = true;
                    continue;
                }
            };
            if self.out_names.is_empty() {
                let probe_names: Vec<String> =
                    block.cols.iter().map(|(n, _)| n.clone()).collect();
                for n in &probe_names {
                    if self.build_names.contains(n) {
                        return Err(EngineError::Exec(format!(
                            "position column {n} appears on both join sides"
                        )));
                    }
                }
                self.out_names = self
                    .build_names
                    .iter()
                    .chain(&probe_names)
                    .cloned()
                    .collect();
            }
            let keyvals = Self::fetch_keys(ctx, &self.probe_keys, &block)?;
            for i in 0..block.len {
                let key: Vec<Value> = keyvals.iter().map(|v| v[i].clone()).collect();
                if let Some(matches) = self.table.lookup(&key) {
                    for build_pos in matches {
                        let mut row = build_pos.clone();
                        row.extend(pos_row(&block.cols, i));
                        self.pending.push_back(row);
                    }
                }
            }
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.table.release(ctx);
        self.probe.close(ctx)
    }
}

// ── PosNLJoin ──

/// Nested-loop join over positional streams for arbitrary predicates. The
/// left side is buffered whole at open and its predicate attributes are
/// fetched once; the right side streams, and for each right row every left
/// row is tested, so output order follows the right stream. Plans are
/// expected to put the smaller input on the left.
pub struct PosNLJoin {
    left: PlanOp,
    right: PlanOp,
    pred: Expr,
    left_attrs: Vec<PhysAttr>,
    right_attrs: Vec<PhysAttr>,
    bound: Option<BoundExpr>,
    left_cols: Vec<(String, Vec<u64>)>,
    left_len: usize,
    left_vals: Vec<Vec<Value>>,
    out_names: Vec<String>,
    pending: VecDeque<Vec<u64>>,
    input_done: bool,
}

impl PosNLJoin {
    pub fn new(
        left: PlanOp,
        right: PlanOp,
        pred: Expr,
        left_attrs: Vec<PhysAttr>,
        right_attrs: Vec<PhysAttr>,
    ) -> PosNLJoin {
        PosNLJoin {
            left,
            right,
            pred,
            left_attrs,
            right_attrs,
            bound: None,
            left_cols: Vec::new(),
            left_len: 0,
            left_vals: Vec::new(),
            out_names: Vec::new(),
            pending: VecDeque::new(),
            input_done: false,
        }
    }
}

impl OpCore for PosNLJoin {
    fn label(&self) -> String {
        format!("NLJoin {}", self.pred)
    }

    fn open(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.left.open(ctx)?;
        self.right.open(ctx)?;
        // slots: left predicate attributes first, then right ones
        let left_attrs = self.left_attrs.clone();
        let right_attrs = self.right_attrs.clone();
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
        while let Some(block) = self.left.next(ctx)? {
            let block = block.into_pos()?;
            if self.left_cols.is_empty() {
                self.left_cols = block
                    .cols
                    .iter()
                    .map(|(n, _)| (n.clone(), Vec::new()))
                    .collect();
            }
            for (acc, (_, v)) in self.left_cols.iter_mut().zip(&block.cols) {
                acc.1.extend_from_slice(v);
            }
            self.left_len += block.len;
        }
        for pa in &self.left_attrs {
            let name = pos_col_name(&pa.alias);
            let positions = self
                .left_cols
                .iter()
                .find(|(n, _)| n == &name)
                .map(|(_, v)| v.as_slice())
                .unwrap_or(&[]);
            let meta = resolve_meta(ctx, pa)?;
            self.left_vals
                .push(read_at_positions(&ctx.pool, &meta, positions, ctx.sort_probe)?);
        }
        self.left.close(ctx)
    }

    fn next(&mut self, ctx: &ExecCtx) -> Result<Option<Block>> {
        if self.left_len == 0 {
            return Ok(None);
        }
        loop {
            if self.pending.len() >= ctx.block_rows
                || (self.input_done && !self.pending.is_empty())
            {
                let take = self.pending.len().min(ctx.block_rows);
                let rows: Vec<Vec<u64>> = self.pending.drain(..take).collect();
                let mut cols: Vec<(String, Vec<u64>)> = self
                    .out_names
                    .iter()
                    .map(|n| (n.clone(), Vec::with_capacity(take)))
                    .collect();
                for row in rows {
                    for (c, v) in cols.iter_mut().zip(row) {
                        c.1.push(v);
                    }
                }
                return Ok(Some(Block::Pos(PosBlock { len: take, cols })));
            }
            if self.input_done {
                return Ok(None);
            }
            let block = match self.right.next(ctx)? {
                Some(b) => b.into_pos()?,
                None => {
                    self.input_done = true;
                    continue;
                }
            };
            if self.out_names.is_empty() {
                for (n, _) in &block.cols {
                    if self.left_cols.iter().any(|(ln, _)| ln == n) {
                        return Err(EngineError::Exec(format!(
                            "position column {n} appears on both join sides"
                        )));
                    }
                }
                self.out_names = self
                    .left_cols
                    .iter()
                    .map(|(n, _)| n.clone())
                    .chain(block.cols.iter().map(|(n, _)| n.clone()))
                    .collect();
            }
            let mut right_vals = Vec::with_capacity(self.right_attrs.len());
            for pa in &self.right_attrs {
                let name = pos_col_name(&pa.alias);
                let positions = block.col(&name).ok_or_else(|| {
                    EngineError::Exec(format!("join input lacks position column {name}"))
                })?;
                let meta = resolve_meta(ctx, pa)?;
                right_vals.push(read_at_positions(&ctx.pool, &meta, positions, ctx.sort_probe)?);
            }
            let expr = self.bound.as_ref().unwrap();
            let nleft = self.left_attrs.len();
            for j in 0..block.len {
                for i in 0..self.left_len {
                    let hit = expr.eval_pred_with(&|slot| {
                        if slot < nleft {
                            self.left_vals[slot][i].clone()
                        } else {
                            right_vals[slot - nleft][j].clone()
                        }
                    })?;
                    if hit {
                        let mut row = pos_row(&self.left_cols, i);
                        row.extend(pos_row(&block.cols, j));
                        self.pending.push_back(row);
                    }
                }
            }
        }
    }

    fn close(&mut self, ctx: &ExecCtx) -> Result<()> {
        self.right.close(ctx)
    }
}
