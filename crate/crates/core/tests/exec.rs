//! Operator-level behavior: block boundaries, filter semantics, join
//! output shape and ordering, and the per-strategy capability table.

mod common;

use std::path::Path;
use std::sync::Arc;

use hmdb_core::blocks::{pos_col_name, BLOCK_CAPACITY};
use hmdb_core::exec::{
    strategy_traits, Block, DataSource, ExecCtx, Materialize, PhysAttr, PlanOp, PosFilter,
    PosHashJoin, PosNLJoin, TupleHashJoin,
};
use hmdb_core::planner::StrategyKind;
use hmdb_core::storage::{open_catalog, BufferPool, Catalog, ColumnVals, DatasetWriter};
use hmdb_ir::{Expr, Value, ValueType};
use tempfile::TempDir;

// ── Toy dataset ──
//
// dim:  k = [1, 2, 3]          tag = [one, two, three]
// fact: fk = [3, 1, 3, 2, 9]   v = [30, 10, 31, 20, 90]
//
// fk = 9 has no partner in dim, so equi-joins drop that row.

fn toy_dataset() -> (TempDir, Arc<Catalog>) {
    let dir = TempDir::new().unwrap();
    write_toy(dir.path());
    let catalog = open_catalog(dir.path()).unwrap();
    (dir, Arc::new(catalog))
}

fn write_toy(dir: &Path) {
    let mut w = DatasetWriter::new(dir).unwrap();
    w.write_column("dim", "k", ValueType::Int64, &ColumnVals::Ints(vec![1, 2, 3]))
        .unwrap();
    w.write_column(
        "dim",
        "tag",
        ValueType::Char(5),
        &ColumnVals::Strs(vec!["one".into(), "two".into(), "three".into()]),
    )
    .unwrap();
    w.write_column(
        "fact",
        "fk",
        ValueType::Int64,
        &ColumnVals::Ints(vec![3, 1, 3, 2, 9]),
    )
    .unwrap();
    w.write_column(
        "fact",
        "v",
        ValueType::Int64,
        &ColumnVals::Ints(vec![30, 10, 31, 20, 90]),
    )
    .unwrap();
    w.finish().unwrap();
}

fn ctx_for(catalog: &Arc<Catalog>) -> ExecCtx {
    ExecCtx::new(Arc::new(BufferPool::new(64)), Arc::clone(catalog))
}

fn drain(op: &mut PlanOp, ctx: &ExecCtx) -> Vec<Block> {
    let mut out = Vec::new();
    while let Some(b) = op.next(ctx).unwrap() {
        b.validate().unwrap();
        out.push(b);
    }
    out
}

fn scan(ctx: &ExecCtx, table: &str, alias: &str) -> PlanOp {
    PlanOp::new(ctx, Box::new(DataSource::new(table, alias)))
}

// ── Scanning and filtering ──

#[test]
fn a_scan_emits_full_blocks_then_the_remainder() {
    let dir = TempDir::new().unwrap();
    let mut w = DatasetWriter::new(dir.path()).unwrap();
    w.write_column(
        "wide",
        "a",
        ValueType::Int64,
        &ColumnVals::Ints((0..2500).collect()),
    )
    .unwrap();
    w.finish().unwrap();
    let catalog = Arc::new(open_catalog(dir.path()).unwrap());
    let ctx = ctx_for(&catalog);

    let mut op = scan(&ctx, "wide", "wide");
    op.open(&ctx).unwrap();
    let blocks = drain(&mut op, &ctx);
    op.close(&ctx).unwrap();

    let lens: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    assert_eq!(lens, vec![BLOCK_CAPACITY, BLOCK_CAPACITY, 2500 - 2 * BLOCK_CAPACITY]);

    // Positions are consecutive across block boundaries.
    let mut expect = 0u64;
    for b in blocks {
        let b = b.into_pos().unwrap();
        for &p in b.col(&pos_col_name("wide")).unwrap() {
            assert_eq!(p, expect);
            expect += 1;
        }
    }
    assert_eq!(expect, 2500);
}

#[test]
fn a_positional_filter_keeps_matching_positions_in_scan_order() {
    // a[i] = (37 * i) % 2500 is a permutation of 0..2500, so matches for
    // a < 50 land on scattered positions and must come back ascending.
    let dir = TempDir::new().unwrap();
    let mut w = DatasetWriter::new(dir.path()).unwrap();
    let vals: Vec<i64> = (0..2500).map(|i| (37 * i) % 2500).collect();
    w.write_column("perm", "a", ValueType::Int64, &ColumnVals::Ints(vals.clone()))
        .unwrap();
    w.finish().unwrap();
    let catalog = Arc::new(open_catalog(dir.path()).unwrap());
    let ctx = ctx_for(&catalog);

    let pred = Expr::IntLit(50).gt(Expr::col("perm", "a"));
    let child = scan(&ctx, "perm", "perm");
    let mut op = PlanOp::new(&ctx, Box::new(PosFilter::new(child, "perm", "perm", pred)));
    op.open(&ctx).unwrap();
    let blocks = drain(&mut op, &ctx);
    op.close(&ctx).unwrap();

    let got: Vec<u64> = blocks
        .into_iter()
        .flat_map(|b| b.into_pos().unwrap().col(&pos_col_name("perm")).unwrap().to_vec())
        .collect();
    let want: Vec<u64> = (0..2500u64).filter(|&i| vals[i as usize] < 50).collect();
    assert_eq!(got.len(), 50);
    assert_eq!(got, want);
}

#[test]
fn a_string_filter_finds_one_nation_of_twenty_five() {
    let (_dir, catalog) = common::gen_dataset("0.01", 3);
    let ctx = ctx_for(&catalog);

    let pred = Expr::col("nation", "n_name").eq(Expr::StrLit("ALGERIA".into()));
    let child = scan(&ctx, "nation", "nation");
    let mut op = PlanOp::new(&ctx, Box::new(PosFilter::new(child, "nation", "nation", pred)));
    op.open(&ctx).unwrap();
    let blocks = drain(&mut op, &ctx);
    op.close(&ctx).unwrap();

    let total: usize = blocks.iter().map(|b| b.len()).sum();
    assert_eq!(total, 1);
}

// ── Tuple-side joins ──

#[test]
fn tuple_join_output_is_build_schema_then_probe_schema() {
    let (_dir, catalog) = toy_dataset();
    let ctx = ctx_for(&catalog);

    let build = PlanOp::new(
        &ctx,
        Box::new(Materialize::new(
            scan(&ctx, "dim", "dim"),
            vec![PhysAttr::new("dim", "dim", "k"), PhysAttr::new("dim", "dim", "tag")],
        )),
    );
    let probe = PlanOp::new(
        &ctx,
        Box::new(Materialize::new(
            scan(&ctx, "fact", "fact"),
            vec![PhysAttr::new("fact", "fact", "fk"), PhysAttr::new("fact", "fact", "v")],
        )),
    );
    let keys = vec![(
        PhysAttr::new("dim", "dim", "k").attr(),
        PhysAttr::new("fact", "fact", "fk").attr(),
    )];
    let mut op = PlanOp::new(&ctx, Box::new(TupleHashJoin::new(build, probe, keys)));
    op.open(&ctx).unwrap();
    let blocks = drain(&mut op, &ctx);
    op.close(&ctx).unwrap();

    assert_eq!(blocks.len(), 1);
    let block = blocks.into_iter().next().unwrap().into_tuple().unwrap();
    let names: Vec<String> = block
        .schema
        .attrs()
        .iter()
        .map(|a| a.attr.to_string())
        .collect();
    assert_eq!(names, vec!["dim.k", "dim.tag", "fact.fk", "fact.v"]);

    // Probe order, one output row per matching build row; fk = 9 drops out.
    let i = Value::Int;
    let s = |x: &str| Value::Str(x.to_string());
    let want = vec![
        vec![i(3), s("three"), i(3), i(30)],
        vec![i(1), s("one"), i(1), i(10)],
        vec![i(3), s("three"), i(3), i(31)],
        vec![i(2), s("two"), i(2), i(20)],
    ];
    assert_eq!(block.rows, want);
}

#[test]
fn positional_join_pairs_up_position_columns() {
    let (_dir, catalog) = toy_dataset();
    let ctx = ctx_for(&catalog);

    let mut op = PlanOp::new(
        &ctx,
        Box::new(PosHashJoin::new(
            scan(&ctx, "dim", "dim"),
            scan(&ctx, "fact", "fact"),
            vec![PhysAttr::new("dim", "dim", "k")],
            vec![PhysAttr::new("fact", "fact", "fk")],
        )),
    );
    op.open(&ctx).unwrap();
    let blocks = drain(&mut op, &ctx);
    op.close(&ctx).unwrap();

    assert_eq!(blocks.len(), 1);
    let block = blocks.into_iter().next().unwrap().into_pos().unwrap();
    let dim_ids = block.col(&pos_col_name("dim")).unwrap();
    let fact_ids = block.col(&pos_col_name("fact")).unwrap();
    let pairs: Vec<(u64, u64)> = dim_ids.iter().copied().zip(fact_ids.iter().copied()).collect();
    assert_eq!(pairs, vec![(2, 0), (0, 1), (2, 2), (1, 3)]);
}

#[test]
fn an_empty_build_side_finishes_without_touching_the_probe() {
    let (_dir, catalog) = toy_dataset();
    let ctx = ctx_for(&catalog);
    let fact_tid = catalog.table("fact").unwrap().table_id;

    // No dim key exceeds 100, so the build side is empty.
    let pred = Expr::col("dim", "k").gt(Expr::IntLit(100));
    let build = PlanOp::new(
        &ctx,
        Box::new(PosFilter::new(scan(&ctx, "dim", "dim"), "dim", "dim", pred)),
    );
    let mut op = PlanOp::new(
        &ctx,
        Box::new(PosHashJoin::new(
            build,
            scan(&ctx, "fact", "fact"),
            vec![PhysAttr::new("dim", "dim", "k")],
            vec![PhysAttr::new("fact", "fact", "fk")],
        )),
    );
    op.open(&ctx).unwrap();
    assert!(op.next(&ctx).unwrap().is_none());
    op.close(&ctx).unwrap();

    for ((tid, _), c) in ctx.pool.snapshot() {
        if tid == fact_tid {
            assert_eq!(c.misses() + c.hits, 0, "probe column was fetched");
        }
    }
}

#[test]
fn nested_loop_streams_the_right_side_and_replays_the_left() {
    let (_dir, catalog) = toy_dataset();
    let ctx = ctx_for(&catalog);

    let pred = Expr::col("fact", "fk").gt(Expr::col("dim", "k"));

    let mut op = PlanOp::new(
        &ctx,
        Box::new(PosNLJoin::new(
            scan(&ctx, "dim", "dim"),
            scan(&ctx, "fact", "fact"),
            pred,
            vec![PhysAttr::new("dim", "dim", "k")],
            vec![PhysAttr::new("fact", "fact", "fk")],
        )),
    );
    op.open(&ctx).unwrap();
    let blocks = drain(&mut op, &ctx);
    op.close(&ctx).unwrap();

    let block = blocks.into_iter().next().unwrap().into_pos().unwrap();
    let pairs: Vec<(u64, u64)> = block
        .col(&pos_col_name("dim"))
        .unwrap()
        .iter()
        .copied()
        .zip(block.col(&pos_col_name("fact")).unwrap().iter().copied())
        .collect();
    // Right rows stream in storage order; for each, all left matches fire
    // in left order: fk=3 admits k in {1,2}, fk=9 admits all of dim.
    let want = vec![(0, 0), (1, 0), (0, 2), (1, 2), (0, 3), (0, 4), (1, 4), (2, 4)];
    assert_eq!(pairs, want);
}

#[test]
fn a_self_join_rejects_colliding_position_columns() {
    let (_dir, catalog) = toy_dataset();
    let ctx = ctx_for(&catalog);

    let mut op = PlanOp::new(
        &ctx,
        Box::new(PosNLJoin::new(
            scan(&ctx, "dim", "dim"),
            scan(&ctx, "dim", "dim"),
            Expr::col("dim", "k").eq(Expr::col("dim", "k")),
            vec![PhysAttr::new("dim", "dim", "k")],
            vec![PhysAttr::new("dim", "dim", "k")],
        )),
    );
    op.open(&ctx).unwrap();
    let err = loop {
        match op.next(&ctx) {
            Ok(Some(_)) => continue,
            Ok(None) => panic!("colliding position columns were accepted"),
            Err(e) => break e,
        }
    };
    assert!(err.to_string().contains("appears on both join sides"), "{err}");
}

// ── Strategy capability table ──

#[test]
fn strategy_traits_match_the_design_table() {
    let t = strategy_traits(StrategyKind::Early).unwrap();
    assert!(
        !t.fast_predicates
            && !t.reread_predicates
            && t.preread_joins
            && !t.reread_joins
            && !t.out_of_order_probing
    );

    let t = strategy_traits(StrategyKind::Late).unwrap();
    assert!(
        t.fast_predicates
            && t.reread_predicates
            && t.preread_joins
            && !t.reread_joins
            && !t.out_of_order_probing
    );

    let t = strategy_traits(StrategyKind::UltraLate).unwrap();
    assert!(
        t.fast_predicates
            && t.reread_predicates
            && !t.preread_joins
            && t.reread_joins
            && t.out_of_order_probing
    );

    // Hybrid has no fixed row: the schedule decides per attribute.
    assert!(strategy_traits(StrategyKind::Hybrid).is_err());
}
