//! Deterministic dataset generator. Cardinalities scale linearly with a
//! rational scale factor (region and nation stay fixed); all values are a
//! pure function of (sf, seed), drawn from one ChaCha8 stream per table so
//! table contents do not depend on generation order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hmdb_ir::{TableDef, TPCH_TABLES};

use crate::storage::{ColumnVals, DatasetWriter};
use crate::{EngineError, Result};

pub const MANIFEST_FILE: &str = "gen.json";

// ── Scale factor ──

/// Positive rational scale factor, e.g. "0.05" or "2". Scaled cardinality
/// is base*sf rounded to nearest, with a floor of one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sf {
    pub num: u64,
    pub den: u64,
    text: String,
}

impl Sf {
    pub fn parse(s: &str) -> Result<Sf> {
        let bad = || EngineError::Plan(format!("invalid scale factor '{s}'"));
        let (int_part, frac_part) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 9
        {
            return Err(bad());
        }
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let den = 10u64.pow(frac_part.len() as u32);
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        let num = whole * den + frac;
        if num == 0 {
            return Err(EngineError::Plan("scale factor must be positive".into()));
        }
        Ok(Sf {
            num,
            den,
            text: s.to_string(),
        })
    }

    pub fn rows(&self, base: u64) -> u64 {
        ((base * self.num + self.den / 2) / self.den).max(1)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for Sf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for Sf {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Sf> {
        Sf::parse(s)
    }
}

pub fn table_rows(sf: &Sf, def: &TableDef) -> u64 {
    if def.scaled {
        sf.rows(def.base_rows)
    } else {
        def.base_rows
    }
}

// ── Fixed small tables ──

pub const REGION_NAMES: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];

pub const NATION_NAMES: [&str; 25] = [
    "ALGERIA",
    "ARGENTINA",
    "BRAZIL",
    "CANADA",
    "EGYPT",
    "ETHIOPIA",
    "FRANCE",
    "GERMANY",
    "INDIA",
    "INDONESIA",
    "IRAN",
    "IRAQ",
    "JAPAN",
    "JORDAN",
    "KENYA",
    "MOROCCO",
    "MOZAMBIQUE",
    "PERU",
    "CHINA",
    "ROMANIA",
    "SAUDI ARABIA",
    "VIETNAM",
    "RUSSIA",
    "UNITED KINGDOM",
    "UNITED STATES",
];

/// Region of each nation, indexed by nation key.
pub const NATION_REGION: [i64; 25] = [
    0, 1, 1, 1, 4, 0, 3, 3, 2, 2, 4, 4, 2, 4, 0, 0, 0, 1, 2, 3, 4, 2, 3, 3, 1,
];

// ── Manifest ──

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub sf: String,
    pub seed: u64,
    pub tables: BTreeMap<String, u64>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| EngineError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| EngineError::Catalog(format!("malformed {MANIFEST_FILE}: {e}")))
}

// ── Generation ──

/// The four suppliers of part p, mirroring the classic assignment: evenly
/// spread around the supplier ring starting at the part itself.
fn supplier_for(part: u64, slot: u64, suppliers: u64) -> u64 {
    let step = (suppliers / 4).max(1);
    ((part - 1 + slot * step) % suppliers) + 1
}

/// The (ps_partkey, ps_suppkey) pairs in emission order: four slots per
/// part, truncated or cycled to exactly `count` rows.
fn partsupp_pairs(parts: u64, suppliers: u64, count: u64) -> Vec<(i64, i64)> {
    let mut pairs = Vec::with_capacity(count as usize);
    'fill: loop {
        for p in 1..=parts {
            for j in 0..4 {
                if pairs.len() as u64 == count {
                    break 'fill;
                }
                pairs.push((p as i64, supplier_for(p, j, suppliers) as i64));
            }
        }
    }
    pairs
}

fn name_column(prefix: &str, count: u64) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}#{k:09}")).collect()
}

/// Generate the dataset into `dir` and return the manifest, which is also
/// written there as gen.json.
pub fn generate(dir: &Path, sf: &Sf, seed: u64) -> Result<Manifest> {
    let rows_of = |name: &str| -> u64 {
        table_rows(sf, hmdb_ir::table_def(name).expect("builtin table"))
    };
    let suppliers = rows_of("supplier");
    let customers = rows_of("customer");
    let parts = rows_of("part");
    let partsupps = rows_of("partsupp");
    let orders = rows_of("orders");
    let pairs = partsupp_pairs(parts, suppliers, partsupps);

    let mut writer = DatasetWriter::new(dir)?;
    let mut manifest = Manifest {
        sf: sf.as_str().to_string(),
        seed,
        tables: BTreeMap::new(),
    };

    for (idx, def) in TPCH_TABLES.iter().enumerate() {
        let rows = table_rows(sf, def);
        manifest.tables.insert(def.name.to_string(), rows);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
        let columns: Vec<(&str, ColumnVals)> = match def.name {
            "region" => vec![
                ("r_regionkey", ColumnVals::Ints((0..5).collect())),
                (
                    "r_name",
                    ColumnVals::Strs(REGION_NAMES.iter().map(|s| s.to_string()).collect()),
                ),
            ],
            "nation" => vec![
                ("n_nationkey", ColumnVals::Ints((0..25).collect())),
                (
                    "n_name",
                    ColumnVals::Strs(NATION_NAMES.iter().map(|s| s.to_string()).collect()),
                ),
                ("n_regionkey", ColumnVals::Ints(NATION_REGION.to_vec())),
            ],
            "supplier" => {
                let keys: Vec<i64> = (1..=rows as i64).collect();
                let nations: Vec<i64> =
                    (0..rows).map(|_| rng.gen_range(0..25)).collect();
                vec![
                    ("s_suppkey", ColumnVals::Ints(keys)),
                    ("s_name", ColumnVals::Strs(name_column("Supplier", rows))),
                    ("s_nationkey", ColumnVals::Ints(nations)),
                ]
            }
            "customer" => {
                let keys: Vec<i64> = (1..=rows as i64).collect();
                let nations: Vec<i64> =
                    (0..rows).map(|_| rng.gen_range(0..25)).collect();
                vec![
                    ("c_custkey", ColumnVals::Ints(keys)),
                    ("c_name", ColumnVals::Strs(name_column("Customer", rows))),
                    ("c_nationkey", ColumnVals::Ints(nations)),
                ]
            }
            "part" => {
                let keys: Vec<i64> = (1..=rows as i64).collect();
                let sizes: Vec<i64> = (0..rows).map(|_| rng.gen_range(1..=50)).collect();
                vec![
                    ("p_partkey", ColumnVals::Ints(keys)),
                    ("p_name", ColumnVals::Strs(name_column("Part", rows))),
                    ("p_size", ColumnVals::Ints(sizes)),
                ]
            }
            "partsupp" => {
                let mut cost = Vec::with_capacity(rows as usize);
                let mut avail = Vec::with_capacity(rows as usize);
                for _ in 0..rows {
                    cost.push(rng.gen_range(100..=100_000));
                    avail.push(rng.gen_range(1..=9_999));
                }
                vec![
                    (
                        "ps_partkey",
                        ColumnVals::Ints(pairs.iter().map(|&(p, _)| p).collect()),
                    ),
                    (
                        "ps_suppkey",
                        ColumnVals::Ints(pairs.iter().map(|&(_, s)| s).collect()),
                    ),
                    ("ps_supplycost", ColumnVals::Ints(cost)),
                    ("ps_availqty", ColumnVals::Ints(avail)),
                ]
            }
            "orders" => {
                let keys: Vec<i64> = (1..=rows as i64).collect();
                let mut cust = Vec::with_capacity(rows as usize);
                let mut price = Vec::with_capacity(rows as usize);
                let mut prio = Vec::with_capacity(rows as usize);
                for _ in 0..rows {
                    cust.push(rng.gen_range(1..=customers as i64));
                    price.push(rng.gen_range(10_000..=50_000_000));
                    prio.push(rng.gen_range(0..10));
                }
                vec![
                    ("o_orderkey", ColumnVals::Ints(keys)),
                    ("o_custkey", ColumnVals::Ints(cust)),
                    ("o_totalprice", ColumnVals::Ints(price)),
                    ("o_shippriority", ColumnVals::Ints(prio)),
                ]
            }
            "lineitem" => {
                let mut okey = Vec::with_capacity(rows as usize);
                let mut pkey = Vec::with_capacity(rows as usize);
                let mut skey = Vec::with_capacity(rows as usize);
                let mut qty = Vec::with_capacity(rows as usize);
                let mut price = Vec::with_capacity(rows as usize);
                let mut disc = Vec::with_capacity(rows as usize);
                for _ in 0..rows {
                    okey.push(rng.gen_range(1..=orders as i64));
                    let (p, s) = pairs[rng.gen_range(0..pairs.len())];
                    pkey.push(p);
                    skey.push(s);
                    qty.push(100 * rng.gen_range(1..=50));
                    price.push(rng.gen_range(100..=10_000_000));
                    disc.push(rng.gen_range(0..=10));
                }
                vec![
                    ("l_orderkey", ColumnVals::Ints(okey)),
                    ("l_partkey", ColumnVals::Ints(pkey)),
                    ("l_suppkey", ColumnVals::Ints(skey)),
                    ("l_quantity", ColumnVals::Ints(qty)),
                    ("l_extendedprice", ColumnVals::Ints(price)),
                    ("l_discount", ColumnVals::Ints(disc)),
                ]
            }
            other => {
                return Err(EngineError::Plan(format!(
                    "no generator for table {other}"
                )))
            }
        };
        for ((name, vals), (decl_name, vtype)) in columns.into_iter().zip(def.columns) {
            debug_assert_eq!(name, *decl_name);
            writer.write_column(def.name, name, *vtype, &vals)?;
        }
    }
    writer.finish()?;

    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| EngineError::Catalog(format!("manifest encoding: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| EngineError::io(&path, e))?;
    Ok(manifest)
}
