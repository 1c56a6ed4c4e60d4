//! Generator properties: cardinalities, determinism, and referential
//! integrity of the generated data.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::sync::Arc;

use hmdb_core::storage::{BufferPool, Catalog, ColumnScan};
use hmdb_core::workload::{read_manifest, Sf, NATION_NAMES};
use hmdb_ir::Value;

fn col_values(catalog: &Arc<Catalog>, table: &str, column: &str) -> Vec<Value> {
    let pool = BufferPool::new(8);
    let meta = catalog.require_column(table, column).unwrap();
    let mut scan = ColumnScan::new(&pool, meta, 4096);
    let mut out = Vec::new();
    while let Some(chunk) = scan.next_chunk().unwrap() {
        out.extend(chunk);
    }
    out
}

fn col_ints(catalog: &Arc<Catalog>, table: &str, column: &str) -> Vec<i64> {
    col_values(catalog, table, column)
        .into_iter()
        .map(|v| v.as_int().unwrap())
        .collect()
}

#[test]
fn cardinalities_scale_linearly_with_fixed_small_tables() {
    let (_dir, catalog) = common::gen_dataset("0.01", 1);
    let rows = |t: &str| catalog.table(t).unwrap().row_count;
    assert_eq!(rows("region"), 5);
    assert_eq!(rows("nation"), 25);
    assert_eq!(rows("supplier"), 100);
    assert_eq!(rows("customer"), 1_500);
    assert_eq!(rows("part"), 2_000);
    assert_eq!(rows("partsupp"), 8_000);
    assert_eq!(rows("orders"), 15_000);
    assert_eq!(rows("lineitem"), 60_000);
}

#[test]
fn scale_factors_round_to_nearest_with_a_floor_of_one() {
    let sf = Sf::parse("0.001").unwrap();
    assert_eq!(sf.rows(1_500_000), 1_500);
    assert_eq!(sf.rows(10_000), 10);
    assert_eq!(sf.rows(150_000), 150);
    // 200000 * 0.0000001 = 0.02 rounds to 0, floored to 1.
    let tiny = Sf::parse("0.0000001").unwrap();
    assert_eq!(tiny.rows(200_000), 1);
    // Rounding is to nearest, not truncation: 2500 * 0.0003 = 0.75 -> 1,
    // and 150000 * 0.00001 = 1.5 -> 2.
    assert_eq!(Sf::parse("0.00001").unwrap().rows(150_000), 2);
}

#[test]
fn scale_factor_parsing_rejects_garbage() {
    for bad in ["", ".", "abc", "-1", "1e3", "1.2.3", "0", "0.0", "0.0000000001"] {
        assert!(Sf::parse(bad).is_err(), "accepted {bad:?}");
    }
    for good in ["1", "2", "0.05", ".5", "0.001"] {
        assert!(Sf::parse(good).is_ok(), "rejected {good:?}");
    }
}

#[test]
fn the_same_seed_reproduces_every_byte() {
    let (dir_a, _) = common::gen_dataset("0.01", 9);
    let (dir_b, _) = common::gen_dataset("0.01", 9);

    let mut names: Vec<String> = fs::read_dir(dir_a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n.ends_with(".col")));
    for name in names {
        let a = fs::read(dir_a.path().join(&name)).unwrap();
        let b = fs::read(dir_b.path().join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn different_seeds_produce_different_payloads() {
    let (_dir_a, cat_a) = common::gen_dataset("0.01", 1);
    let (_dir_b, cat_b) = common::gen_dataset("0.01", 2);
    assert_ne!(
        col_ints(&cat_a, "orders", "o_custkey"),
        col_ints(&cat_b, "orders", "o_custkey")
    );
}

#[test]
fn nation_is_the_fixed_table_with_algeria_first() {
    let (_dir, catalog) = common::gen_dataset("0.01", 77);
    let names: Vec<String> = col_values(&catalog, "nation", "n_name")
        .into_iter()
        .map(|v| match v {
            Value::Str(s) => s,
            other => panic!("n_name produced {other:?}"),
        })
        .collect();
    assert_eq!(names.len(), 25);
    assert_eq!(names[0], "ALGERIA");
    assert_eq!(names, NATION_NAMES.to_vec());
    assert_eq!(names.iter().filter(|n| *n == "ALGERIA").count(), 1);
}

#[test]
fn foreign_keys_stay_inside_their_parent_domains() {
    let (_dir, catalog) = common::gen_dataset("0.01", 5);

    for v in col_ints(&catalog, "customer", "c_nationkey") {
        assert!((0..25).contains(&v));
    }
    for v in col_ints(&catalog, "supplier", "s_nationkey") {
        assert!((0..25).contains(&v));
    }
    for v in col_ints(&catalog, "orders", "o_custkey") {
        assert!((1..=1_500).contains(&v));
    }
    for v in col_ints(&catalog, "lineitem", "l_orderkey") {
        assert!((1..=15_000).contains(&v));
    }

    // Every lineitem (partkey, suppkey) pair exists in partsupp, so the
    // two q9 join paths agree on which rows survive.
    let ps: BTreeSet<(i64, i64)> = col_ints(&catalog, "partsupp", "ps_partkey")
        .into_iter()
        .zip(col_ints(&catalog, "partsupp", "ps_suppkey"))
        .collect();
    let li: Vec<(i64, i64)> = col_ints(&catalog, "lineitem", "l_partkey")
        .into_iter()
        .zip(col_ints(&catalog, "lineitem", "l_suppkey"))
        .collect();
    for pair in li {
        assert!(ps.contains(&pair), "lineitem references missing pair {pair:?}");
    }
    // And partsupp itself stays in the part/supplier domains.
    for (p, s) in ps {
        assert!((1..=2_000).contains(&p));
        assert!((1..=100).contains(&s));
    }
}

#[test]
fn the_manifest_records_what_was_generated() {
    let (dir, _catalog) = common::gen_dataset("0.05", 13);
    let m = read_manifest(dir.path()).unwrap();
    assert_eq!(m.sf, "0.05");
    assert_eq!(m.seed, 13);
    assert_eq!(m.tables.len(), 8);
    assert_eq!(m.tables["lineitem"], 300_000);
    assert_eq!(m.tables["nation"], 25);
}
