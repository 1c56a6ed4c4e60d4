//! Metrics snapshots: per-column attribution, the running-query guard,
//! and ratio comparison including zero denominators.

mod common;

use std::collections::BTreeMap;

use hmdb_core::metrics::{compare, snapshot, ColumnIo, QueryMetrics};
use hmdb_core::planner::{build_plan, StrategyKind};
use hmdb_core::storage::PAGE_SIZE;
use hmdb_ir::{builtin_query, parse_query_text};

#[test]
fn a_single_page_scan_shows_up_under_the_right_column() {
    let (_dir, catalog) = common::gen_dataset("0.01", 21);
    let ctx = common::fresh_ctx(&catalog, 32);
    let query = parse_query_text(
        "query nations\n\
         table nation\n\
         filter nation.n_regionkey = 2\n\
         select nation.n_name\n",
        "nations",
    )
    .unwrap();
    let spec = build_plan(&query, StrategyKind::Late, None).unwrap();
    let (rows, m) = common::run(&spec, &query, &ctx);

    assert_eq!(rows.len(), 5, "five nations sit in region 2");
    // 25 rows of each nation column fit on one page.
    assert_eq!(m.column("nation.n_regionkey").pages_seq, 1);
    assert_eq!(m.column("nation.n_regionkey").pages_rand, 0);
    assert_eq!(m.column("nation.n_name").pages_read(), 1);
    assert_eq!(m.bytes_read_total(), m.pages_read_total() * PAGE_SIZE as u64);
    assert!(m.rows_pushed_total >= rows.len() as u64);
    assert!(!m.ops.is_empty());
}

#[test]
fn untouched_columns_are_absent_from_the_snapshot() {
    let (_dir, catalog) = common::gen_dataset("0.01", 21);
    let ctx = common::fresh_ctx(&catalog, 64);
    let query = builtin_query("q5mod").unwrap();
    let spec = build_plan(&query, StrategyKind::Late, None).unwrap();
    let (rows, m) = common::run(&spec, &query, &ctx);

    assert!(!rows.is_empty());
    for touched in ["nation.n_name", "customer.c_name", "lineitem.l_extendedprice"] {
        assert!(m.columns.contains_key(touched), "{touched} missing");
    }
    for untouched in ["region.r_name", "partsupp.ps_supplycost", "lineitem.l_quantity"] {
        assert!(!m.columns.contains_key(untouched), "{untouched} present");
    }
}

#[test]
fn a_snapshot_cannot_be_taken_mid_query() {
    let (_dir, catalog) = common::gen_dataset("0.01", 21);
    let ctx = common::fresh_ctx(&catalog, 8);
    ctx.begin_query();
    let err = snapshot(&ctx).unwrap_err();
    assert!(
        err.to_string().contains("metrics snapshot while a query is running"),
        "{err}"
    );
    ctx.finish_query(0.0);
    assert!(snapshot(&ctx).is_ok());
}

#[test]
fn back_to_back_queries_report_only_their_own_io() {
    let (_dir, catalog) = common::gen_dataset("0.01", 21);
    let ctx = common::fresh_ctx(&catalog, 64);
    let query = parse_query_text(
        "query nations\n\
         table nation\n\
         filter nation.n_regionkey = 2\n\
         select nation.n_name\n",
        "nations",
    )
    .unwrap();
    let spec = build_plan(&query, StrategyKind::UltraLate, None).unwrap();

    let (_, first) = common::run(&spec, &query, &ctx);
    let (_, second) = common::run(&spec, &query, &ctx);

    // The second run finds every page already pooled: misses moved to
    // hits, and the delta counts only this query's traffic.
    assert!(first.pages_read_total() > 0);
    assert_eq!(second.pages_read_total(), 0);
    assert!(second.columns["nation.n_regionkey"].hits > 0);
}

#[test]
fn comparison_ratios_survive_zero_denominators() {
    let io = |seq: u64, rand: u64| ColumnIo {
        pages_seq: seq,
        pages_rand: rand,
        hits: 0,
        evictions: 0,
    };
    let metrics = |cols: Vec<(&str, ColumnIo)>, rows: u64, ht: u64| QueryMetrics {
        columns: cols
            .into_iter()
            .map(|(n, c)| (n.to_string(), c))
            .collect::<BTreeMap<_, _>>(),
        ops: vec![],
        rows_pushed_total: rows,
        hashtable_bytes_peak: ht,
        wall_ms: 0.0,
    };

    let left = metrics(vec![("t.a", io(4, 2)), ("t.b", io(1, 0))], 100, 64);
    let right = metrics(vec![("t.a", io(2, 0))], 50, 0);

    let cmp = compare(&left, &right);
    assert_eq!(cmp.pages_seq.ratio(), Some(2.5));
    assert_eq!(cmp.rows_pushed.ratio(), Some(2.0));
    // Right side never allocated a hash table: the ratio is undefined,
    // not infinite or a panic.
    assert_eq!(cmp.hashtable_peak.ratio(), None);
    assert!(cmp.hashtable_peak.to_string().contains("undefined"));
    // t.b exists on the left only; its rand/rand ratio is 0/0.
    let (seq, rand) = &cmp.columns["t.b"];
    assert_eq!(seq.ratio(), None);
    assert_eq!(rand.ratio(), None);
    // And a column map entry exists for every column either side touched.
    assert_eq!(cmp.columns.len(), 2);
}
