//! The acceptance gate: eight numbered end-to-end checks, each printing a
//! single `acceptance <n> PASS/FAIL` line on stderr. Run with
//!
//! ```text
//! cargo test -p hmdb --test acceptance -- --nocapture
//! ```
//!
//! to see every line; any FAIL also fails the test run. Checks 1, 2, 7
//! and 8 are exact (result equivalence, the capability table, randomized
//! properties, determinism). Checks 3 through 6 assert I/O-counter
//! relations between strategies; where a relation has a numeric band, the
//! band was pinned from the first measured run on this generator and is
//! asserted as a regression thereafter. Comparison failures report
//! through the printed line; only infrastructure errors (I/O, planning)
//! panic directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use hmdb_core::blocks::{pos_col_name, HybridBlock, Schema, SchemaAttr};
use hmdb_core::exec::{
    run_plan, strategy_traits, Block, DataSource, ExecCtx, PhysAttr, PlanOp, PosNLJoin,
    StrategyTraits,
};
use hmdb_core::hybrid::{CombineSpec, HYDataSource, HYFilter, HYHashJoin, Specialization};
use hmdb_core::metrics::{snapshot, QueryMetrics};
use hmdb_core::planner::{build_plan_with, PlanOptions, StrategyKind};
use hmdb_core::storage::{open_catalog, BufferPool, Catalog, ColumnVals, DatasetWriter};
use hmdb_core::workload::{generate, Sf};
use hmdb_ir::{builtin_query, compare_multisets, AttrRef, Expr, Row, Value, ValueType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

// ── Reporting ──

fn report(n: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    eprintln!("acceptance {n} {verdict}: {detail}");
    assert!(ok, "acceptance {n} failed: {detail}");
}

// ── Shared datasets ──
//
// Three scale factors, generated once per test binary under a fixed
// location in the system temp directory. Regenerated on every run so a
// stale copy from an older build can never skew a counter; generation is
// deterministic, so the contents are the same every time regardless.

struct Datasets {
    sf001: PathBuf,
    sf005: PathBuf,
    sf01: PathBuf,
}

static DATASETS: OnceLock<Datasets> = OnceLock::new();

fn data() -> &'static Datasets {
    DATASETS.get_or_init(|| {
        let root = std::env::temp_dir().join("hmdb-acceptance-data");
        if root.exists() {
            fs::remove_dir_all(&root).unwrap();
        }
        let gen = |s: &str| {
            let dir = root.join(format!("sf-{s}"));
            generate(&dir, &Sf::parse(s).unwrap(), 42).unwrap();
            dir
        };
        Datasets {
            sf001: gen("0.01"),
            sf005: gen("0.05"),
            sf01: gen("0.1"),
        }
    })
}

// ── Driving the engine ──

fn default_pool(catalog: &Catalog) -> usize {
    let largest = catalog
        .columns()
        .iter()
        .map(|c| c.page_count())
        .max()
        .unwrap_or(1);
    (largest.div_ceil(10)).max(1) as usize
}

/// One cold run of a built-in query: fresh pool, default schedule,
/// default options. Returns the result rows and the counter snapshot.
fn run(dir: &Path, query: &str, strategy: StrategyKind, pool: Option<usize>) -> (Vec<Row>, QueryMetrics) {
    let q = builtin_query(query).expect("built-in query");
    let catalog = Arc::new(open_catalog(dir).unwrap());
    let pool_pages = pool.unwrap_or_else(|| default_pool(&catalog));
    let spec = build_plan_with(&q, strategy, None, PlanOptions::default()).unwrap();
    let ctx = ExecCtx::new(Arc::new(BufferPool::new(pool_pages)), catalog);
    let mut root = spec.instantiate(&ctx).unwrap();
    let rows = run_plan(&mut root, &ctx, &q.select).unwrap();
    let m = snapshot(&ctx).unwrap();
    (rows, m)
}

fn metrics(dir: &Path, query: &str, strategy: StrategyKind, pool: Option<usize>) -> QueryMetrics {
    run(dir, query, strategy, pool).1
}

// ── 1: result equivalence against the reference evaluator ──

#[test]
fn c1_every_strategy_matches_the_reference_evaluator() {
    let d = data();
    let mut failures = Vec::new();
    let mut checked = 0;
    for (dir, sf) in [(&d.sf001, "0.01"), (&d.sf005, "0.05")] {
        let db = hmdb_oracle::load(dir).unwrap();
        for qname in ["q5mod", "q5mod_nocname", "q9mod"] {
            let q = builtin_query(qname).unwrap();
            let mut want = db.run(&q).unwrap();
            for strategy in StrategyKind::ALL {
                let mut got = run(dir, qname, strategy, None).0;
                checked += 1;
                if let Some(diff) = compare_multisets(&mut got, &mut want) {
                    failures.push(format!("sf={sf} {qname} {strategy}: {diff}"));
                }
            }
        }
    }
    let ok = failures.is_empty();
    let detail = if ok {
        format!("{checked} strategy runs (2 scale factors x 3 queries x 4 strategies) equal the reference evaluator's multisets")
    } else {
        failures.join("; ")
    };
    report(1, ok, &detail);
}

// ── 2: the capability table ──

#[test]
fn c2_the_capability_table_is_exact() {
    use StrategyKind::*;
    let t = |fast_predicates, reread_predicates, preread_joins, reread_joins, out_of_order_probing| StrategyTraits {
        fast_predicates,
        reread_predicates,
        preread_joins,
        reread_joins,
        out_of_order_probing,
    };
    let rows = [
        (Early, t(false, false, true, false, false)),
        (Late, t(true, true, true, false, false)),
        (UltraLate, t(true, true, false, true, true)),
    ];
    let mut ok = true;
    let mut bad = String::new();
    for (kind, want) in rows {
        match strategy_traits(kind) {
            Ok(got) if got == want => {}
            Ok(got) => {
                ok = false;
                bad = format!("{kind}: got {got:?}, want {want:?}");
            }
            Err(e) => {
                ok = false;
                bad = format!("{kind}: unexpected error {e}");
            }
        }
    }
    // Hybrid has no single row: its answers are per attribute, through a
    // materialization schedule.
    if strategy_traits(Hybrid).is_ok() {
        ok = false;
        bad = "hybrid should refuse a whole-strategy answer".into();
    }
    let detail = if ok {
        "early/late/ultralate trait rows exact, hybrid defers to the schedule".to_string()
    } else {
        bad
    };
    report(2, ok, &detail);
}

// ── 3: random re-reads under a pool smaller than the probe column ──

#[test]
fn c3_a_small_pool_forces_ultralate_into_random_rereads() {
    let d = data();
    let catalog = open_catalog(&d.sf01).unwrap();
    // A quarter of the customer.c_name column (93 pages at this scale),
    // plus head-room so the other twelve touched columns do not thrash
    // each other. Ultra-late must materialize c_name at the top of the
    // plan, where positions arrive in probe order, not storage order.
    let cname_pages = catalog.require_column("customer", "c_name").unwrap().page_count() as usize;
    let pool = cname_pages.div_ceil(4) + 32;

    let hy = metrics(&d.sf01, "q5mod", StrategyKind::Hybrid, Some(pool));
    let ul = metrics(&d.sf01, "q5mod", StrategyKind::UltraLate, Some(pool));
    let h = hy.column("customer.c_name").pages_rand;
    let u = ul.column("customer.c_name").pages_rand;

    let ok = h == 0 && u >= 2 && u >= 2 * h;
    report(
        3,
        ok,
        &format!(
            "q5mod sf=0.1 pool={pool}: pages_rand(customer.c_name) hybrid={h}, ultralate={u} (hybrid must be 0)"
        ),
    );
}

// ── 4: the cost of materializing before filtering joins ──

#[test]
fn c4_late_materializes_rows_that_filtering_joins_then_discard() {
    let d = data();
    let la = metrics(&d.sf005, "q5mod", StrategyKind::Late, None);
    let hy = metrics(&d.sf005, "q5mod", StrategyKind::Hybrid, None);

    let rows_ratio = la.rows_pushed_total as f64 / hy.rows_pushed_total as f64;
    let bytes_ratio = la.bytes_read_total() as f64 / hy.bytes_read_total() as f64;

    // Pinned from the first measured run: late pushes 1.90x the rows of
    // hybrid (781440 vs 411803) because it forms full tuples for every
    // filter survivor before the joins throw 24 of every 25 away. Page
    // reads tie (2441 vs 2443 pages): a 1-in-25 uniform selection still
    // lands on every page of each fetched column at this scale, so the
    // penalty is carried entirely by rows pushed, not bytes.
    let ok = (1.80..=1.99).contains(&rows_ratio) && (0.985..=1.015).contains(&bytes_ratio);
    report(
        4,
        ok,
        &format!(
            "q5mod sf=0.05: late/hybrid rows_pushed {}/{} = {rows_ratio:.3} (pinned 1.80..1.99), bytes {}/{} = {bytes_ratio:.4} (pinned tie)",
            la.rows_pushed_total,
            hy.rows_pushed_total,
            la.bytes_read_total(),
            hy.bytes_read_total()
        ),
    );
}

// ── 5: hybrid tracks ultra-late once the wide column is gone ──

#[test]
fn c5_without_the_wide_column_hybrid_tracks_ultralate() {
    let d = data();
    // A pool large enough that no touched page is ever evicted, so the
    // comparison isolates access pattern from cache pressure.
    let pool = Some(8192);
    let hy = metrics(&d.sf005, "q5mod_nocname", StrategyKind::Hybrid, pool);
    let ul = metrics(&d.sf005, "q5mod_nocname", StrategyKind::UltraLate, pool);

    let h = hy.pages_read_total();
    let u = ul.pages_read_total();
    let ratio = h as f64 / u as f64;
    let ok = (0.9..=1.1).contains(&ratio);
    report(
        5,
        ok,
        &format!("q5mod_nocname sf=0.05 pool=8192: total page fetches hybrid={h}, ultralate={u}, ratio {ratio:.4} (must be within 10%)"),
    );
}

// ── 6: the five-table join ──

#[test]
fn c6_hybrid_dominates_on_the_five_table_join() {
    let d = data();
    let la = metrics(&d.sf01, "q9mod", StrategyKind::Late, None);
    let ul = metrics(&d.sf01, "q9mod", StrategyKind::UltraLate, None);
    let hy = metrics(&d.sf01, "q9mod", StrategyKind::Hybrid, None);

    let triple = |m: &QueryMetrics| (m.bytes_read_total(), m.rows_pushed_total, m.pages_rand_total());
    let h = triple(&hy);
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, r) in [("late", triple(&la)), ("ultralate", triple(&ul))] {
        let le = h.0 <= r.0 && h.1 <= r.1 && h.2 <= r.2;
        let strict = h.0 < r.0 || h.1 < r.1 || h.2 < r.2;
        if !(le && strict) {
            ok = false;
        }
        notes.push(format!(
            "vs {name}: bytes {}/{}, rows {}/{}, rand {}/{}",
            h.0, r.0, h.1, r.1, h.2, r.2
        ));
    }

    // The decisive column: ultra-late reaches back into ps_supplycost at
    // positions scrambled by three joins; hybrid fetched it during the
    // partsupp scan and never returns.
    let u_cost = ul.column("partsupp.ps_supplycost").pages_rand;
    let h_cost = hy.column("partsupp.ps_supplycost").pages_rand;
    if !(u_cost > 0 && h_cost == 0) {
        ok = false;
    }
    notes.push(format!("pages_rand(ps_supplycost) ultralate={u_cost} hybrid={h_cost}"));

    report(6, ok, &format!("q9mod sf=0.1 default pool: {}", notes.join("; ")));
}

// ── 7: randomized property suites ──

/// Shadow model for the alignment fuzz: each row is its position entries
/// plus an optional cached tuple, kept in lockstep with the real block.
struct Shadow {
    pos_names: Vec<String>,
    attrs: Vec<SchemaAttr>,
    rows: Vec<(Vec<u64>, Vec<Value>)>,
}

impl Shadow {
    fn to_block(&self) -> HybridBlock {
        let pos = self
            .pos_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), self.rows.iter().map(|(p, _)| p[i]).collect()))
            .collect();
        let schema = Schema::new(self.attrs.clone()).unwrap();
        let tuples = if self.attrs.is_empty() {
            Vec::new()
        } else {
            self.rows.iter().map(|(_, t)| t.clone()).collect()
        };
        HybridBlock {
            len: self.rows.len(),
            pos,
            schema,
            tuples,
        }
    }
}

fn blocks_agree(b: &HybridBlock, s: &Shadow) -> bool {
    let want = s.to_block();
    b.len == want.len && b.pos == want.pos && b.schema == want.schema && b.tuples == want.tuples
}

fn alignment_fuzz() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11a9);
    let mut total_ops = 0usize;
    for round in 0..2000 {
        let len = rng.gen_range(0..96);
        let npos = rng.gen_range(0..=3usize);
        let nattr = rng.gen_range(0..=3usize);
        let mut shadow = Shadow {
            pos_names: (0..npos).map(|i| pos_col_name(&format!("t{i}"))).collect(),
            attrs: (0..nattr)
                .map(|i| SchemaAttr {
                    attr: AttrRef {
                        table: "t".into(),
                        column: format!("a{i}"),
                    },
                    vtype: ValueType::Int64,
                })
                .collect(),
            rows: (0..len)
                .map(|_| {
                    (
                        (0..npos).map(|_| rng.gen_range(0..10_000)).collect(),
                        (0..nattr).map(|_| Value::Int(rng.gen_range(0..10_000))).collect(),
                    )
                })
                .collect(),
        };
        let mut block = shadow.to_block();
        block.validate().map_err(|e| format!("round {round}: fresh block invalid: {e}"))?;

        for op in 0..5 {
            total_ops += 1;
            if rng.gen_bool(0.5) {
                // gather: arbitrary in-range indices, repeats allowed
                let n = rng.gen_range(0..=block.len + block.len / 2);
                let idx: Vec<usize> = if block.len == 0 {
                    Vec::new()
                } else {
                    (0..n).map(|_| rng.gen_range(0..block.len)).collect()
                };
                block = block
                    .gather(&idx)
                    .map_err(|e| format!("round {round} op {op}: gather failed: {e}"))?;
                shadow.rows = idx.iter().map(|&i| shadow.rows[i].clone()).collect();
            } else {
                // project: keep a shuffled subset of position columns and
                // cached attributes
                let mut keep_p: Vec<usize> = (0..shadow.pos_names.len())
                    .filter(|_| rng.gen_bool(0.7))
                    .collect();
                if rng.gen_bool(0.3) {
                    keep_p.reverse();
                }
                let mut keep_a: Vec<usize> = (0..shadow.attrs.len())
                    .filter(|_| rng.gen_bool(0.7))
                    .collect();
                if rng.gen_bool(0.3) {
                    keep_a.reverse();
                }
                let names: Vec<String> = keep_p.iter().map(|&i| shadow.pos_names[i].clone()).collect();
                let arefs: Vec<AttrRef> = keep_a.iter().map(|&i| shadow.attrs[i].attr.clone()).collect();
                block = block
                    .project(&names, &arefs)
                    .map_err(|e| format!("round {round} op {op}: project failed: {e}"))?;
                shadow.rows = shadow
                    .rows
                    .iter()
                    .map(|(p, t)| {
                        (
                            keep_p.iter().map(|&i| p[i]).collect(),
                            keep_a.iter().map(|&i| t[i].clone()).collect(),
                        )
                    })
                    .collect();
                shadow.pos_names = names;
                shadow.attrs = keep_a.iter().map(|&i| shadow.attrs[i].clone()).collect();
            }
            block
                .validate()
                .map_err(|e| format!("round {round} op {op}: invariant broken: {e}"))?;
            if !blocks_agree(&block, &shadow) {
                return Err(format!("round {round} op {op}: block diverged from the shadow model"));
            }
        }
    }
    Ok(format!("alignment fuzz {total_ops} ops"))
}

fn counter_conservation() -> Result<String, String> {
    let dir = TempDir::new().unwrap();
    let vals: Vec<i64> = (0..509 * 24).collect();
    let mut w = DatasetWriter::new(dir.path()).unwrap();
    w.write_column("t", "a", ValueType::Int64, &ColumnVals::Ints(vals)).unwrap();
    w.finish().unwrap();
    let catalog = open_catalog(dir.path()).unwrap();
    let meta = catalog.require_column("t", "a").unwrap();
    let total_pages = meta.page_count();

    let mut rng = ChaCha8Rng::seed_from_u64(0xc0457);
    for round in 0..50 {
        let cap = rng.gen_range(1..=32usize);
        let pool = BufferPool::new(cap);
        let calls = rng.gen_range(1..400u64);
        let mut touched = std::collections::BTreeSet::new();
        let mut page = 0u64;
        for _ in 0..calls {
            page = if rng.gen_bool(0.3) {
                (page + 1) % total_pages
            } else {
                rng.gen_range(0..total_pages)
            };
            pool.fetch_page(meta, page).unwrap();
            touched.insert(page);
        }
        let c = pool.column_counters(meta.table_id, meta.column_id);
        let distinct = touched.len() as u64;
        if c.hits + c.misses() != calls {
            return Err(format!(
                "round {round}: hits {} + misses {} != calls {calls}",
                c.hits,
                c.misses()
            ));
        }
        if c.misses() < distinct {
            return Err(format!(
                "round {round}: {} misses cannot cover {distinct} distinct pages",
                c.misses()
            ));
        }
        if c.evictions > c.misses() || c.misses() - c.evictions > cap as u64 {
            return Err(format!(
                "round {round}: evictions {} inconsistent with misses {} at capacity {cap}",
                c.evictions,
                c.misses()
            ));
        }
        if cap as u64 >= total_pages && c.misses() != distinct {
            return Err(format!(
                "round {round}: nothing can be evicted at capacity {cap}, yet misses {} != distinct {distinct}",
                c.misses()
            ));
        }
    }
    Ok("counter conservation 50 traces".into())
}

fn nested_loop_order() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x41e570);
    for round in 0..20 {
        let n = rng.gen_range(1..=60);
        let m = rng.gen_range(1..=90);
        let lk: Vec<i64> = (0..n).map(|_| rng.gen_range(0..12)).collect();
        let rk: Vec<i64> = (0..m).map(|_| rng.gen_range(0..12)).collect();
        let dir = TempDir::new().unwrap();
        let mut w = DatasetWriter::new(dir.path()).unwrap();
        w.write_column("l", "k", ValueType::Int64, &ColumnVals::Ints(lk.clone())).unwrap();
        w.write_column("r", "k", ValueType::Int64, &ColumnVals::Ints(rk.clone())).unwrap();
        w.finish().unwrap();
        let catalog = Arc::new(open_catalog(dir.path()).unwrap());
        let ctx = ExecCtx::new(Arc::new(BufferPool::new(16)), catalog);

        let mut op = PlanOp::new(
            &ctx,
            Box::new(PosNLJoin::new(
                PlanOp::new(&ctx, Box::new(DataSource::new("l", "l"))),
                PlanOp::new(&ctx, Box::new(DataSource::new("r", "r"))),
                Expr::col("r", "k").gt(Expr::col("l", "k")),
                vec![PhysAttr::new("l", "l", "k")],
                vec![PhysAttr::new("r", "r", "k")],
            )),
        );
        op.open(&ctx).map_err(|e| e.to_string())?;
        let mut got: Vec<(u64, u64)> = Vec::new();
        while let Some(b) = op.next(&ctx).map_err(|e| e.to_string())? {
            b.validate().map_err(|e| e.to_string())?;
            let p = match b {
                Block::Pos(p) => p,
                _ => return Err(format!("round {round}: expected a position block")),
            };
            let ls = p.col(&pos_col_name("l")).unwrap();
            let rs = p.col(&pos_col_name("r")).unwrap();
            got.extend(ls.iter().copied().zip(rs.iter().copied()));
        }
        op.close(&ctx).map_err(|e| e.to_string())?;

        // Right rows stream in storage order; every left match fires in
        // left order before the next right row is considered.
        let mut want: Vec<(u64, u64)> = Vec::new();
        for (j, rv) in rk.iter().enumerate() {
            for (i, lv) in lk.iter().enumerate() {
                if lv < rv {
                    want.push((i as u64, j as u64));
                }
            }
        }
        if got != want {
            return Err(format!(
                "round {round}: emission order diverged ({} pairs vs {} expected)",
                got.len(),
                want.len()
            ));
        }
    }
    Ok("nested-loop order 20 rounds".into())
}

fn specialization_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5bec1a);
    for round in 0..100 {
        let na = rng.gen_range(1..=60);
        let nb = rng.gen_range(1..=100);
        let ta_k: Vec<i64> = (0..na).map(|_| rng.gen_range(0..12)).collect();
        let ta_v: Vec<i64> = (0..na).map(|_| rng.gen_range(0..1000)).collect();
        let tb_k: Vec<i64> = (0..nb).map(|_| rng.gen_range(0..12)).collect();
        let dir = TempDir::new().unwrap();
        let mut w = DatasetWriter::new(dir.path()).unwrap();
        w.write_column("ta", "k", ValueType::Int64, &ColumnVals::Ints(ta_k.clone())).unwrap();
        w.write_column("ta", "v", ValueType::Int64, &ColumnVals::Ints(ta_v.clone())).unwrap();
        w.write_column("tb", "k", ValueType::Int64, &ColumnVals::Ints(tb_k.clone())).unwrap();
        w.finish().unwrap();
        let catalog = Arc::new(open_catalog(dir.path()).unwrap());
        let pa = |t: &str, c: &str| PhysAttr::new(t, t, c);
        let aref = |t: &str, c: &str| AttrRef {
            table: t.into(),
            column: c.into(),
        };

        let drain_rows = |op: &mut PlanOp, ctx: &ExecCtx| -> Result<Vec<HybridBlock>, String> {
            op.open(ctx).map_err(|e| e.to_string())?;
            let mut out = Vec::new();
            while let Some(b) = op.next(ctx).map_err(|e| e.to_string())? {
                b.validate().map_err(|e| e.to_string())?;
                out.push(b.into_hybrid().map_err(|e| e.to_string())?);
            }
            op.close(ctx).map_err(|e| e.to_string())?;
            Ok(out)
        };

        // Join: packed combine against the generic form.
        let join_run = |spec: Specialization| -> Result<Vec<(u64, Value)>, String> {
            let ctx = ExecCtx::new(Arc::new(BufferPool::new(8)), Arc::clone(&catalog));
            let mut op = PlanOp::new(
                &ctx,
                Box::new(HYHashJoin::new(
                    PlanOp::new(&ctx, Box::new(HYDataSource::new("ta", "ta", vec![]))),
                    PlanOp::new(&ctx, Box::new(HYDataSource::new("tb", "tb", vec![]))),
                    vec![pa("ta", "k")],
                    vec![pa("tb", "k")],
                    vec![pa("ta", "k"), pa("ta", "v")],
                    vec![pa("tb", "k")],
                    CombineSpec {
                        keep_pos: vec![pos_col_name("tb")],
                        keep_attrs: vec![aref("ta", "v")],
                    },
                    spec,
                )),
            );
            let mut rows = Vec::new();
            for h in drain_rows(&mut op, &ctx)? {
                let pos = h.pos_col(&pos_col_name("tb")).unwrap().to_vec();
                let vs = h.attr_values(&aref("ta", "v")).unwrap();
                rows.extend(pos.into_iter().zip(vs));
            }
            Ok(rows)
        };
        let jg = join_run(Specialization::Generic)?;
        let jp = join_run(Specialization::HashJoinCombine)?;
        if jg != jp {
            return Err(format!("round {round}: hashjoin_combine diverged from generic"));
        }

        // Filter over bare positions: pos_only against generic.
        let filter_pos = |spec: Specialization| -> Result<Vec<u64>, String> {
            let ctx = ExecCtx::new(Arc::new(BufferPool::new(8)), Arc::clone(&catalog));
            let mut op = PlanOp::new(
                &ctx,
                Box::new(HYFilter::new(
                    PlanOp::new(&ctx, Box::new(HYDataSource::new("ta", "ta", vec![]))),
                    Expr::IntLit(6).gt(Expr::col("ta", "k")),
                    vec![pa("ta", "k")],
                    Some(CombineSpec {
                        keep_pos: vec![pos_col_name("ta")],
                        keep_attrs: vec![],
                    }),
                    spec,
                )),
            );
            let mut out = Vec::new();
            for h in drain_rows(&mut op, &ctx)? {
                out.extend(h.pos_col(&pos_col_name("ta")).unwrap().iter().copied());
            }
            Ok(out)
        };
        if filter_pos(Specialization::Generic)? != filter_pos(Specialization::PosOnly)? {
            return Err(format!("round {round}: pos_only diverged from generic"));
        }

        // Filter over cached tuples: tuple_only against generic.
        let filter_tuple = |spec: Specialization| -> Result<Vec<Value>, String> {
            let ctx = ExecCtx::new(Arc::new(BufferPool::new(8)), Arc::clone(&catalog));
            let mut op = PlanOp::new(
                &ctx,
                Box::new(HYFilter::new(
                    PlanOp::new(
                        &ctx,
                        Box::new(HYDataSource::new("ta", "ta", vec![pa("ta", "k"), pa("ta", "v")])),
                    ),
                    Expr::IntLit(6).gt(Expr::col("ta", "k")),
                    // the binding for a cached attribute still rides the
                    // fetch list; provision finds it cached and reads nothing
                    vec![pa("ta", "k")],
                    Some(CombineSpec {
                        keep_pos: vec![],
                        keep_attrs: vec![aref("ta", "v")],
                    }),
                    spec,
                )),
            );
            let mut out = Vec::new();
            for h in drain_rows(&mut op, &ctx)? {
                out.extend(h.attr_values(&aref("ta", "v")).unwrap());
            }
            Ok(out)
        };
        if filter_tuple(Specialization::Generic)? != filter_tuple(Specialization::TupleOnly)? {
            return Err(format!("round {round}: tuple_only diverged from generic"));
        }
    }
    Ok("specialization equivalence 100 rounds".into())
}

#[test]
fn c7_randomized_property_suites_hold() {
    let mut notes = Vec::new();
    let mut ok = true;
    for result in [
        alignment_fuzz(),
        counter_conservation(),
        nested_loop_order(),
        specialization_equivalence(),
    ] {
        match result {
            Ok(note) => notes.push(note),
            Err(e) => {
                ok = false;
                notes.push(e);
            }
        }
    }
    report(7, ok, &notes.join(", "));
}

// ── 8: determinism ──

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().into_string().unwrap(),
            fs::read(entry.path()).unwrap(),
        );
    }
    out
}

fn counters_equal(a: &QueryMetrics, b: &QueryMetrics) -> bool {
    a.columns == b.columns
        && a.rows_pushed_total == b.rows_pushed_total
        && a.hashtable_bytes_peak == b.hashtable_bytes_peak
}

#[test]
fn c8_generation_and_counters_are_deterministic() {
    let d = data();
    let mut ok = true;
    let mut notes = Vec::new();

    // Same (sf, seed) twice, from scratch, must be byte-identical.
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let sf = Sf::parse("0.01").unwrap();
    generate(a.path(), &sf, 42).unwrap();
    generate(b.path(), &sf, 42).unwrap();
    let fa = dir_bytes(a.path());
    let fb = dir_bytes(b.path());
    if fa == fb {
        notes.push(format!("regeneration byte-identical across {} files", fa.len()));
    } else {
        ok = false;
        notes.push("regenerated dataset differs".into());
    }

    // Any fixed configuration must reproduce rows and every counter.
    for (dir, qname, strategy) in [
        (&d.sf005, "q5mod", StrategyKind::Hybrid),
        (&d.sf001, "q9mod", StrategyKind::UltraLate),
    ] {
        let (r1, m1) = run(dir, qname, strategy, None);
        let (r2, m2) = run(dir, qname, strategy, None);
        if r1 == r2 && counters_equal(&m1, &m2) {
            notes.push(format!("{qname}/{strategy} repeats bit for bit"));
        } else {
            ok = false;
            notes.push(format!("{qname}/{strategy} is not reproducible"));
        }
    }

    report(8, ok, &notes.join(", "));
}
