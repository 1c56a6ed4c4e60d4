//! Strategy plan builders. All four strategies share the same join order
//! (the query's, verbatim) and the same build-side choice per join; they
//! differ only in where attribute values are materialized.

use std::collections::BTreeSet;

use hmdb_ir::{table_def, AttrRef, CmpOp, Expr, QueryIR, TpchSchema};

use crate::blocks::pos_col_name;
use crate::exec::PhysAttr;
use crate::hybrid::{CombineSpec, Specialization};
use crate::planner::schedule::{entry_edges, select_attrs, MatPoint, MaterializationSchedule};
use crate::planner::spec::{OpSpec, PlanSpec};
use crate::planner::StrategyKind;
use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct PlanOptions {
    /// Build hybrid joins with the generic specialization (buffered build
    /// blocks, reference payloads) instead of the packed combine form.
    /// Output and fetch counts are identical either way.
    pub generic_hybrid_joins: bool,
}

pub fn build_plan(
    query: &QueryIR,
    strategy: StrategyKind,
    schedule: Option<&MaterializationSchedule>,
) -> Result<PlanSpec> {
    build_plan_with(query, strategy, schedule, PlanOptions::default())
}

pub fn build_plan_with(
    query: &QueryIR,
    strategy: StrategyKind,
    schedule: Option<&MaterializationSchedule>,
    opts: PlanOptions,
) -> Result<PlanSpec> {
    hmdb_ir::validate(query, &TpchSchema)?;
    if schedule.is_some() && strategy != StrategyKind::Hybrid {
        return Err(EngineError::Plan(
            "a materialization schedule only applies to the hybrid strategy".into(),
        ));
    }
    match strategy {
        StrategyKind::Hybrid => {
            let default;
            let sched = match schedule {
                Some(s) => s,
                None => {
                    default = MaterializationSchedule::default_for(query);
                    &default
                }
            };
            build_hybrid(query, sched, opts)
        }
        _ => build_classic(query, strategy),
    }
}

// ── Shared chain analysis ──

fn phys(query: &QueryIR, a: &AttrRef) -> PhysAttr {
    let table = query.physical(&a.table).expect("validated alias");
    PhysAttr::new(&a.table, table, &a.column)
}

/// Crude single-predicate selectivity used only to pick join build sides:
/// equality keeps a tenth, a range comparison a third.
fn selectivity(e: &Expr) -> f64 {
    match e {
        Expr::And(l, r) => selectivity(l) * selectivity(r),
        Expr::Cmp(_, CmpOp::Eq, _) => 0.1,
        Expr::Cmp(_, _, _) => 1.0 / 3.0,
        _ => 1.0,
    }
}

/// (estimated rows after filters, unfiltered rows) at scale factor 1.
/// Plan shape must not depend on the dataset at hand, so estimates always
/// use the schema's base cardinalities.
fn leaf_card(query: &QueryIR, alias: &str) -> (f64, f64) {
    let table = query.physical(alias).expect("validated alias");
    let base = table_def(table).expect("known table").base_rows as f64;
    let sel: f64 = query
        .filters_on(alias)
        .iter()
        .map(|f| selectivity(&f.expr))
        .product();
    (base * sel, base)
}

/// Key attributes of both sides of every edge from `from` on, appended to
/// the selected attributes: everything worth keeping in a cache at that
/// point of the chain.
fn useful_from(query: &QueryIR, select: &[AttrRef], from: usize) -> Vec<AttrRef> {
    let mut out = select.to_vec();
    for edge in query.joins.iter().skip(from) {
        for kp in &edge.keys {
            for a in [&kp.left, &kp.right] {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
        }
    }
    out
}

struct ChainStep {
    /// Alias joining the tree at this edge.
    leaf_alias: String,
    /// Key attrs on the tree side, aligned with `leaf_keys`. On the first
    /// edge the left alias plays the tree role.
    stream_keys: Vec<AttrRef>,
    leaf_keys: Vec<AttrRef>,
    stream_is_build: bool,
}

/// Walk the join chain picking a build side per edge: the side with the
/// smaller estimate builds, ties go to the tree side. The estimate of a
/// join result is probe_est scaled by the build side's filter survival,
/// and it keeps the probe side's unfiltered count as its base.
fn chain_steps(query: &QueryIR) -> Vec<ChainStep> {
    let mut steps = Vec::new();
    if query.joins.is_empty() {
        return steps;
    }
    let mut scope: BTreeSet<String> = BTreeSet::new();
    scope.insert(query.joins[0].left_alias().to_string());
    let (mut est, mut base) = leaf_card(query, query.joins[0].left_alias());
    for edge in &query.joins {
        let left_in_scope = scope.contains(edge.left_alias());
        let (leaf_alias, stream_keys, leaf_keys): (String, Vec<AttrRef>, Vec<AttrRef>) =
            if left_in_scope {
                (
                    edge.right_alias().to_string(),
                    edge.keys.iter().map(|p| p.left.clone()).collect(),
                    edge.keys.iter().map(|p| p.right.clone()).collect(),
                )
            } else {
                (
                    edge.left_alias().to_string(),
                    edge.keys.iter().map(|p| p.right.clone()).collect(),
                    edge.keys.iter().map(|p| p.left.clone()).collect(),
                )
            };
        let (leaf_est, leaf_base) = leaf_card(query, &leaf_alias);
        let stream_is_build = est <= leaf_est;
        if stream_is_build {
            est = leaf_est * (est / base);
            base = leaf_base;
        } else {
            est *= leaf_est / leaf_base;
        }
        scope.insert(leaf_alias.clone());
        steps.push(ChainStep {
            leaf_alias,
            stream_keys,
            leaf_keys,
            stream_is_build,
        });
    }
    steps
}

// ── Classic strategies ──

fn build_classic(query: &QueryIR, strategy: StrategyKind) -> Result<PlanSpec> {
    let select = select_attrs(query);
    let used = useful_from(query, &select, 0);

    // Attributes a table must carry in tuples, in physical column order.
    // Filter columns join the list only when filters run on tuples.
    let mat_list = |alias: &str, include_pred: bool| -> Vec<PhysAttr> {
        let table = query.physical(alias).expect("validated alias");
        let def = table_def(table).expect("known table");
        let mut wanted: Vec<&AttrRef> = used.iter().filter(|a| a.table == alias).collect();
        let pred_cols: Vec<AttrRef>;
        if include_pred {
            pred_cols = query
                .filters_on(alias)
                .iter()
                .flat_map(|f| f.expr.columns())
                .collect();
            wanted.extend(pred_cols.iter());
        }
        def.columns
            .iter()
            .filter(|(c, _)| wanted.iter().any(|w| w.column == *c))
            .map(|(c, _)| PhysAttr::new(alias, table, c))
            .collect()
    };

    let leaf = |alias: &str| -> OpSpec {
        let table = query.physical(alias).expect("validated alias").to_string();
        let scan = OpSpec::Scan {
            table: table.clone(),
            alias: alias.to_string(),
        };
        match strategy {
            StrategyKind::Early => {
                let mut node = OpSpec::Materialize {
                    child: Box::new(scan),
                    attrs: mat_list(alias, true),
                };
                for f in query.filters_on(alias) {
                    node = OpSpec::TupleFilter {
                        child: Box::new(node),
                        pred: f.expr.clone(),
                    };
                }
                node
            }
            StrategyKind::Late | StrategyKind::UltraLate => {
                let mut node = scan;
                for f in query.filters_on(alias) {
                    node = OpSpec::PosFilter {
                        child: Box::new(node),
                        alias: alias.to_string(),
                        table: table.clone(),
                        pred: f.expr.clone(),
                    };
                }
                if strategy == StrategyKind::Late {
                    node = OpSpec::Materialize {
                        child: Box::new(node),
                        attrs: mat_list(alias, false),
                    };
                }
                node
            }
            StrategyKind::Hybrid => unreachable!("hybrid has its own builder"),
        }
    };

    let tuple_joins = matches!(strategy, StrategyKind::Early | StrategyKind::Late);
    let mut node;
    if query.joins.is_empty() {
        node = leaf(&query.tables[0].alias);
    } else {
        node = leaf(query.joins[0].left_alias());
        for step in chain_steps(query) {
            let leaf_node = leaf(&step.leaf_alias);
            let (build, probe, build_keys, probe_keys) = if step.stream_is_build {
                (node, leaf_node, step.stream_keys, step.leaf_keys)
            } else {
                (leaf_node, node, step.leaf_keys, step.stream_keys)
            };
            node = if tuple_joins {
                OpSpec::TupleHashJoin {
                    build: Box::new(build),
                    probe: Box::new(probe),
                    keys: build_keys.into_iter().zip(probe_keys).collect(),
                }
            } else {
                OpSpec::PosHashJoin {
                    build: Box::new(build),
                    probe: Box::new(probe),
                    build_keys: build_keys.iter().map(|a| phys(query, a)).collect(),
                    probe_keys: probe_keys.iter().map(|a| phys(query, a)).collect(),
                }
            };
        }
    }
    if strategy == StrategyKind::UltraLate {
        node = OpSpec::Materialize {
            child: Box::new(node),
            attrs: select.iter().map(|a| phys(query, a)).collect(),
        };
    }
    Ok(PlanSpec {
        strategy,
        root: node,
    })
}

// ── Hybrid strategy ──

fn build_hybrid(
    query: &QueryIR,
    sched: &MaterializationSchedule,
    opts: PlanOptions,
) -> Result<PlanSpec> {
    let select = select_attrs(query);
    let entry = entry_edges(query);
    let njoins = query.joins.len();

    // Aliases whose position columns feed each edge's fetch phase: key
    // lookups plus attributes scheduled at that edge.
    let mut sites: Vec<BTreeSet<String>> = vec![BTreeSet::new(); njoins];
    for (k, edge) in query.joins.iter().enumerate() {
        for kp in &edge.keys {
            sites[k].insert(kp.left.table.clone());
            sites[k].insert(kp.right.table.clone());
        }
    }
    for (a, p) in sched.iter() {
        if let MatPoint::BeforeJoin(k) = p {
            sites[k].insert(a.table.clone());
        }
    }
    let top_users: BTreeSet<String> = sched
        .all_at(MatPoint::AtTop)
        .iter()
        .map(|a| a.table.clone())
        .collect();

    // Position columns still needed strictly after edge k, in binding
    // order. Position columns live in memory only, so keeping one costs
    // no I/O; dropping is purely to shed dead weight.
    let pos_after = |k: usize, scope: &BTreeSet<String>| -> Vec<String> {
        let mut need: BTreeSet<&str> = top_users.iter().map(|s| s.as_str()).collect();
        for site in sites.iter().skip(k + 1) {
            need.extend(site.iter().map(|s| s.as_str()));
        }
        query
            .tables
            .iter()
            .filter(|b| scope.contains(&b.alias) && need.contains(b.alias.as_str()))
            .map(|b| pos_col_name(&b.alias))
            .collect()
    };

    // Leaf chain for one alias; returns the node and what its output
    // carries in cache.
    let leaf = |alias: &str| -> (OpSpec, Vec<AttrRef>) {
        let table = query.physical(alias).expect("validated alias").to_string();
        let at_src = sched.attrs_at(alias, MatPoint::AtSource);
        let mut cached = at_src.clone();
        let mut node = OpSpec::HYScan {
            table,
            alias: alias.to_string(),
            fetch: at_src.iter().map(|a| phys(query, a)).collect(),
        };
        let keep_from = entry.get(alias).copied().unwrap_or(njoins);
        let useful = useful_from(query, &select, keep_from);
        for f in query.filters_on(alias) {
            let pred_attrs = f.expr.columns();
            let mut keep_attrs = cached.clone();
            for a in &pred_attrs {
                if useful.contains(a) && !keep_attrs.contains(a) {
                    keep_attrs.push(a.clone());
                }
            }
            let spec = if cached.is_empty() && keep_attrs.is_empty() {
                Specialization::PosOnly
            } else {
                Specialization::Generic
            };
            node = OpSpec::HYFilter {
                child: Box::new(node),
                pred: f.expr.clone(),
                fetch: pred_attrs.iter().map(|a| phys(query, a)).collect(),
                combine: Some(CombineSpec {
                    keep_pos: vec![pos_col_name(alias)],
                    keep_attrs: keep_attrs.clone(),
                }),
                spec,
            };
            cached = keep_attrs;
        }
        let after = sched.attrs_at(alias, MatPoint::AfterFilter);
        if !after.is_empty() {
            node = OpSpec::HYMaterialize {
                child: Box::new(node),
                fetch: after.iter().map(|a| phys(query, a)).collect(),
                combine: None,
            };
            for a in after {
                if !cached.contains(&a) {
                    cached.push(a);
                }
            }
        }
        (node, cached)
    };

    let spec = if opts.generic_hybrid_joins {
        Specialization::Generic
    } else {
        Specialization::HashJoinCombine
    };

    let mut scope: BTreeSet<String> = BTreeSet::new();
    let mut node;
    let mut cached;
    if query.joins.is_empty() {
        let alias = query.tables[0].alias.clone();
        let (n, c) = leaf(&alias);
        node = n;
        cached = c;
        scope.insert(alias);
    } else {
        let first = query.joins[0].left_alias().to_string();
        let (n, c) = leaf(&first);
        node = n;
        cached = c;
        scope.insert(first);
        for (k, step) in chain_steps(query).into_iter().enumerate() {
            let (leaf_node, leaf_cached) = leaf(&step.leaf_alias);
            scope.insert(step.leaf_alias.clone());

            let mut sched_stream = Vec::new();
            let mut sched_leaf = Vec::new();
            for a in sched.all_at(MatPoint::BeforeJoin(k)) {
                if a.table == step.leaf_alias {
                    sched_leaf.push(a);
                } else {
                    sched_stream.push(a);
                }
            }
            // Fetch lists: keys first, then scheduled attributes. The
            // fetch phase skips anything already cached below.
            let mk_fetch = |keys: &[AttrRef], extra: &[AttrRef]| -> Vec<PhysAttr> {
                let mut refs: Vec<&AttrRef> = Vec::new();
                for a in keys.iter().chain(extra.iter()) {
                    if !refs.contains(&a) {
                        refs.push(a);
                    }
                }
                refs.into_iter().map(|a| phys(query, a)).collect()
            };
            let fetch_stream = mk_fetch(&step.stream_keys, &sched_stream);
            let fetch_leaf = mk_fetch(&step.leaf_keys, &sched_leaf);

            // Everything cached after this join, trimmed to what later
            // stages can still use.
            let mut avail = cached.clone();
            for a in leaf_cached
                .iter()
                .chain(sched_stream.iter())
                .chain(sched_leaf.iter())
                .chain(step.stream_keys.iter())
                .chain(step.leaf_keys.iter())
            {
                if !avail.contains(a) {
                    avail.push(a.clone());
                }
            }
            let useful = useful_from(query, &select, k + 1);
            let keep_attrs: Vec<AttrRef> = useful
                .iter()
                .filter(|a| avail.contains(a))
                .cloned()
                .collect();
            let combine = CombineSpec {
                keep_pos: pos_after(k, &scope),
                keep_attrs: keep_attrs.clone(),
            };

            let (build, probe, bkeys, pkeys, fb, fp) = if step.stream_is_build {
                (
                    node,
                    leaf_node,
                    step.stream_keys,
                    step.leaf_keys,
                    fetch_stream,
                    fetch_leaf,
                )
            } else {
                (
                    leaf_node,
                    node,
                    step.leaf_keys,
                    step.stream_keys,
                    fetch_leaf,
                    fetch_stream,
                )
            };
            node = OpSpec::HYHashJoin {
                build: Box::new(build),
                probe: Box::new(probe),
                build_keys: bkeys.iter().map(|a| phys(query, a)).collect(),
                probe_keys: pkeys.iter().map(|a| phys(query, a)).collect(),
                fetch_build: fb,
                fetch_probe: fp,
                combine,
                spec,
            };
            cached = keep_attrs;
        }
    }

    let at_top = sched.all_at(MatPoint::AtTop);
    if !at_top.is_empty() {
        for a in &at_top {
            if !cached.contains(a) {
                cached.push(a.clone());
            }
        }
        node = OpSpec::HYMaterialize {
            child: Box::new(node),
            fetch: at_top.iter().map(|a| phys(query, a)).collect(),
            combine: Some(CombineSpec {
                keep_pos: Vec::new(),
                keep_attrs: select.clone(),
            }),
        };
    }
    // The schedule covers every selected attribute and combines keep
    // selected attributes once cached, so the top block is complete.
    debug_assert!(select.iter().all(|a| cached.contains(a)));
    node = OpSpec::HYToTuple {
        child: Box::new(node),
        attrs: select.clone(),
    };
    Ok(PlanSpec {
        strategy: StrategyKind::Hybrid,
        root: node,
    })
}
