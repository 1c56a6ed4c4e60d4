//! Per-attribute materialization points for the hybrid strategy.

use std::collections::BTreeMap;

use hmdb_ir::{AttrRef, QueryIR};

use crate::{EngineError, Result};

/// Where a selected attribute's values are fetched from disk. Points are
/// upper bounds: an attribute that happens to be cached earlier (say a
/// filter already read it) is not fetched again.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatPoint {
    /// At the table scan, before any filtering.
    AtSource,
    /// Right above the table's filters, on surviving rows only.
    AfterFilter,
    /// In the fetch phase of join `k` (zero-based, in query join order),
    /// on the side the attribute's table lives on.
    BeforeJoin(usize),
    /// Above the last join, at final result positions.
    AtTop,
}

impl std::fmt::Display for MatPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatPoint::AtSource => write!(f, "at_source"),
            MatPoint::AfterFilter => write!(f, "after_filter"),
            MatPoint::BeforeJoin(k) => write!(f, "before_join:{k}"),
            MatPoint::AtTop => write!(f, "at_top"),
        }
    }
}

fn parse_point(s: &str) -> Result<MatPoint> {
    match s {
        "at_source" => Ok(MatPoint::AtSource),
        "after_filter" => Ok(MatPoint::AfterFilter),
        "at_top" => Ok(MatPoint::AtTop),
        _ => {
            if let Some(k) = s.strip_prefix("before_join:") {
                let k: usize = k
                    .parse()
                    .map_err(|_| EngineError::Plan(format!("bad join index in '{s}'")))?;
                Ok(MatPoint::BeforeJoin(k))
            } else {
                Err(EngineError::Plan(format!(
                    "unknown materialization point '{s}'"
                )))
            }
        }
    }
}

/// Selected attributes in first-appearance order, deduplicated. This is
/// the canonical attribute order used for fetch lists and output schemas.
pub fn select_attrs(query: &QueryIR) -> Vec<AttrRef> {
    let mut out: Vec<AttrRef> = Vec::new();
    for item in &query.select {
        for a in item.columns() {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

/// One materialization point per selected attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializationSchedule {
    /// Kept in select-attribute order.
    points: Vec<(AttrRef, MatPoint)>,
}

impl MaterializationSchedule {
    /// Default schedule: each attribute is fetched going into the join
    /// where its table first participates, so values ride along instead of
    /// being re-read later at shuffled positions. A query without joins
    /// materializes everything at the top.
    pub fn default_for(query: &QueryIR) -> MaterializationSchedule {
        let entry = entry_edges(query);
        let points = select_attrs(query)
            .into_iter()
            .map(|a| {
                let p = match entry.get(&a.table) {
                    Some(&k) => MatPoint::BeforeJoin(k),
                    None => MatPoint::AtTop,
                };
                (a, p)
            })
            .collect();
        MaterializationSchedule { points }
    }

    /// Parse `attr point` lines (`#` comments and blank lines allowed) and
    /// validate against the query: every selected attribute gets exactly
    /// one point, and each point may only name a join the attribute's
    /// table has already reached.
    pub fn parse(text: &str, query: &QueryIR) -> Result<MaterializationSchedule> {
        let mut given: BTreeMap<String, MatPoint> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (attr, point) = line.split_once(char::is_whitespace).ok_or_else(|| {
                EngineError::Plan(format!("schedule line {}: expected 'attr point'", lineno + 1))
            })?;
            let point = parse_point(point.trim())?;
            if given.insert(attr.to_string(), point).is_some() {
                return Err(EngineError::Plan(format!(
                    "duplicate schedule point for {attr}"
                )));
            }
        }

        let attrs = select_attrs(query);
        let entry = entry_edges(query);
        let mut points = Vec::with_capacity(attrs.len());
        for a in &attrs {
            let key = a.to_string();
            let point = *given.get(&key).ok_or_else(|| {
                EngineError::Plan(format!("schedule missing a point for selected attribute {a}"))
            })?;
            given.remove(&key);
            if let MatPoint::BeforeJoin(k) = point {
                if k >= query.joins.len() {
                    return Err(EngineError::Plan(format!(
                        "schedule point for {a}: join index {k} out of range ({} joins)",
                        query.joins.len()
                    )));
                }
                match entry.get(&a.table) {
                    Some(&e) if e <= k => {}
                    _ => {
                        return Err(EngineError::Plan(format!(
                            "schedule point for {a}: table {} is not in scope before join {k}",
                            a.table
                        )));
                    }
                }
            }
            points.push((a.clone(), point));
        }
        if let Some((attr, _)) = given.into_iter().next() {
            return Err(EngineError::Plan(format!(
                "schedule point for {attr} which is not a selected attribute"
            )));
        }
        Ok(MaterializationSchedule { points })
    }

    pub fn point(&self, attr: &AttrRef) -> Option<MatPoint> {
        self.points
            .iter()
            .find(|(a, _)| a == attr)
            .map(|(_, p)| *p)
    }

    /// Attributes of `alias` scheduled at `point`, in select order.
    pub fn attrs_at(&self, alias: &str, point: MatPoint) -> Vec<AttrRef> {
        self.points
            .iter()
            .filter(|(a, p)| a.table == alias && *p == point)
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// All attributes scheduled at `point`, in select order.
    pub fn all_at(&self, point: MatPoint) -> Vec<AttrRef> {
        self.points
            .iter()
            .filter(|(_, p)| *p == point)
            .map(|(a, _)| a.clone())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AttrRef, MatPoint)> {
        self.points.iter().map(|(a, p)| (a, *p))
    }
}

impl std::fmt::Display for MaterializationSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (a, p) in &self.points {
            writeln!(f, "{a} {p}")?;
        }
        Ok(())
    }
}

/// Join index at which each alias enters the plan. The first edge admits
/// both of its aliases; every later edge admits exactly one new alias.
pub fn entry_edges(query: &QueryIR) -> BTreeMap<String, usize> {
    let mut entry = BTreeMap::new();
    for (k, edge) in query.joins.iter().enumerate() {
        for alias in [edge.left_alias(), edge.right_alias()] {
            entry.entry(alias.to_string()).or_insert(k);
        }
    }
    entry
}
