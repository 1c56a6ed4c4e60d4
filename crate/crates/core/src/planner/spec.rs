//! Catalog-free plan descriptions. A PlanSpec fixes every decision (join
//! sides, key orientation, fetch lists, combines, specializations) so that
//! instantiation against a catalog is purely mechanical and the rendered
//! signature is stable for a given query and strategy.

use hmdb_ir::{AttrRef, Expr};

use crate::exec::{
    DataSource, ExecCtx, Materialize, PhysAttr, PlanOp, PosFilter, PosHashJoin, PosNLJoin,
    TupleFilter, TupleHashJoin,
};
use crate::hybrid::{
    CombineSpec, HYDataSource, HYFilter, HYHashJoin, HYMaterialize, HYNestedLoopJoin, HYProject,
    HYToTuple, Specialization,
};
use crate::planner::StrategyKind;
use crate::Result;

#[derive(Debug, Clone)]
pub enum OpSpec {
    Scan {
        table: String,
        alias: String,
    },
    PosFilter {
        child: Box<OpSpec>,
        alias: String,
        table: String,
        pred: Expr,
    },
    TupleFilter {
        child: Box<OpSpec>,
        pred: Expr,
    },
    Materialize {
        child: Box<OpSpec>,
        attrs: Vec<PhysAttr>,
    },
    TupleHashJoin {
        build: Box<OpSpec>,
        probe: Box<OpSpec>,
        keys: Vec<(AttrRef, AttrRef)>,
    },
    PosHashJoin {
        build: Box<OpSpec>,
        probe: Box<OpSpec>,
        build_keys: Vec<PhysAttr>,
        probe_keys: Vec<PhysAttr>,
    },
    PosNLJoin {
        left: Box<OpSpec>,
        right: Box<OpSpec>,
        pred: Expr,
        left_attrs: Vec<PhysAttr>,
        right_attrs: Vec<PhysAttr>,
    },
    HYScan {
        table: String,
        alias: String,
        fetch: Vec<PhysAttr>,
    },
    HYFilter {
        child: Box<OpSpec>,
        pred: Expr,
        fetch: Vec<PhysAttr>,
        combine: Option<CombineSpec>,
        spec: Specialization,
    },
    HYProject {
        child: Box<OpSpec>,
        combine: CombineSpec,
    },
    HYMaterialize {
        child: Box<OpSpec>,
        fetch: Vec<PhysAttr>,
        combine: Option<CombineSpec>,
    },
    HYHashJoin {
        build: Box<OpSpec>,
        probe: Box<OpSpec>,
        build_keys: Vec<PhysAttr>,
        probe_keys: Vec<PhysAttr>,
        fetch_build: Vec<PhysAttr>,
        fetch_probe: Vec<PhysAttr>,
        combine: CombineSpec,
        spec: Specialization,
    },
    HYNLJoin {
        left: Box<OpSpec>,
        right: Box<OpSpec>,
        pred: Expr,
        pred_left: Vec<PhysAttr>,
        pred_right: Vec<PhysAttr>,
        fetch_left: Vec<PhysAttr>,
        fetch_right: Vec<PhysAttr>,
        combine: CombineSpec,
        spec: Specialization,
    },
    HYToTuple {
        child: Box<OpSpec>,
        attrs: Vec<AttrRef>,
    },
}

#[derive(Debug, Clone)]
pub struct PlanSpec {
    pub strategy: StrategyKind,
    pub root: OpSpec,
}

impl PlanSpec {
    /// One operator per line, children indented two spaces below their
    /// parent (build/left side first). Hybrid operators add their fetch and
    /// combine configuration as annotation lines.
    pub fn signature(&self) -> String {
        let mut out = String::new();
        render(&self.root, 0, &mut out);
        out
    }

    pub fn instantiate(&self, ctx: &ExecCtx) -> Result<PlanOp> {
        inst(&self.root, ctx)
    }
}

fn attr_list(attrs: &[PhysAttr]) -> String {
    attrs
        .iter()
        .map(|pa| pa.attr().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn key_list(build: &[PhysAttr], probe: &[PhysAttr]) -> String {
    build
        .iter()
        .zip(probe)
        .map(|(b, p)| format!("{} = {}", b.attr(), p.attr()))
        .collect::<Vec<_>>()
        .join(" and ")
}

fn combine_list(c: &CombineSpec) -> String {
    let mut parts = c.keep_pos.clone();
    parts.extend(c.keep_attrs.iter().map(|a| a.to_string()));
    parts.join(", ")
}

fn scan_line(name: &str, table: &str, alias: &str) -> String {
    if table == alias {
        format!("{name} {table}")
    } else {
        format!("{name} {table} as {alias}")
    }
}

fn push_line(out: &mut String, depth: usize, line: &str) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(line);
    out.push('\n');
}

fn render(op: &OpSpec, depth: usize, out: &mut String) {
    match op {
        OpSpec::Scan { table, alias } => {
            push_line(out, depth, &scan_line("DataSource", table, alias));
        }
        OpSpec::PosFilter { child, pred, .. } => {
            push_line(out, depth, &format!("Filter {pred}"));
            render(child, depth + 1, out);
        }
        OpSpec::TupleFilter { child, pred } => {
            push_line(out, depth, &format!("Filter {pred}"));
            render(child, depth + 1, out);
        }
        OpSpec::Materialize { child, attrs } => {
            push_line(out, depth, &format!("Materialize [{}]", attr_list(attrs)));
            render(child, depth + 1, out);
        }
        OpSpec::TupleHashJoin { build, probe, keys } => {
            let keys = keys
                .iter()
                .map(|(b, p)| format!("{b} = {p}"))
                .collect::<Vec<_>>()
                .join(" and ");
            push_line(out, depth, &format!("HashJoin {keys}"));
            render(build, depth + 1, out);
            render(probe, depth + 1, out);
        }
        OpSpec::PosHashJoin {
            build,
            probe,
            build_keys,
            probe_keys,
        } => {
            push_line(
                out,
                depth,
                &format!("HashJoin {}", key_list(build_keys, probe_keys)),
            );
            render(build, depth + 1, out);
            render(probe, depth + 1, out);
        }
        OpSpec::PosNLJoin {
            left, right, pred, ..
        } => {
            push_line(out, depth, &format!("NLJoin {pred}"));
            render(left, depth + 1, out);
            render(right, depth + 1, out);
        }
        OpSpec::HYScan {
            table,
            alias,
            fetch,
        } => {
            push_line(out, depth, &scan_line("HYDataSource", table, alias));
            if !fetch.is_empty() {
                push_line(out, depth + 1, &format!("fetch: {}", attr_list(fetch)));
            }
        }
        OpSpec::HYFilter {
            child,
            pred,
            fetch,
            combine,
            ..
        } => {
            push_line(out, depth, &format!("HYFilter {pred}"));
            if !fetch.is_empty() {
                push_line(out, depth + 1, &format!("fetch: {}", attr_list(fetch)));
            }
            if let Some(c) = combine {
                push_line(out, depth + 1, &format!("combine: {}", combine_list(c)));
            }
            render(child, depth + 1, out);
        }
        OpSpec::HYProject { child, combine } => {
            push_line(out, depth, "HYProject");
            push_line(out, depth + 1, &format!("combine: {}", combine_list(combine)));
            render(child, depth + 1, out);
        }
        OpSpec::HYMaterialize {
            child,
            fetch,
            combine,
        } => {
            push_line(out, depth, &format!("HYMaterialize [{}]", attr_list(fetch)));
            if let Some(c) = combine {
                push_line(out, depth + 1, &format!("combine: {}", combine_list(c)));
            }
            render(child, depth + 1, out);
        }
        OpSpec::HYHashJoin {
            build,
            probe,
            build_keys,
            probe_keys,
            fetch_build,
            fetch_probe,
            combine,
            ..
        } => {
            push_line(
                out,
                depth,
                &format!("HYHashJoin {}", key_list(build_keys, probe_keys)),
            );
            if !fetch_build.is_empty() {
                push_line(
                    out,
                    depth + 1,
                    &format!("fetch left: {}", attr_list(fetch_build)),
                );
            }
            if !fetch_probe.is_empty() {
                push_line(
                    out,
                    depth + 1,
                    &format!("fetch right: {}", attr_list(fetch_probe)),
                );
            }
            push_line(
                out,
                depth + 1,
                &format!("combine: {}", combine_list(combine)),
            );
            render(build, depth + 1, out);
            render(probe, depth + 1, out);
        }
        OpSpec::HYNLJoin {
            left,
            right,
            pred,
            fetch_left,
            fetch_right,
            combine,
            ..
        } => {
            push_line(out, depth, &format!("HYNestedLoopJoin {pred}"));
            if !fetch_left.is_empty() {
                push_line(
                    out,
                    depth + 1,
                    &format!("fetch left: {}", attr_list(fetch_left)),
                );
            }
            if !fetch_right.is_empty() {
                push_line(
                    out,
                    depth + 1,
                    &format!("fetch right: {}", attr_list(fetch_right)),
                );
            }
            push_line(
                out,
                depth + 1,
                &format!("combine: {}", combine_list(combine)),
            );
            render(left, depth + 1, out);
            render(right, depth + 1, out);
        }
        OpSpec::HYToTuple { child, .. } => {
            push_line(out, depth, "HYToTuple");
            render(child, depth + 1, out);
        }
    }
}

fn inst(op: &OpSpec, ctx: &ExecCtx) -> Result<PlanOp> {
    let core: Box<dyn crate::exec::OpCore> = match op {
        OpSpec::Scan { table, alias } => Box::new(DataSource::new(table, alias)),
        OpSpec::PosFilter {
            child,
            alias,
            table,
            pred,
        } => Box::new(PosFilter::new(
            inst(child, ctx)?,
            alias,
            table,
            pred.clone(),
        )),
        OpSpec::TupleFilter { child, pred } => {
            Box::new(TupleFilter::new(inst(child, ctx)?, pred.clone()))
        }
        OpSpec::Materialize { child, attrs } => {
            Box::new(Materialize::new(inst(child, ctx)?, attrs.clone()))
        }
        OpSpec::TupleHashJoin { build, probe, keys } => Box::new(TupleHashJoin::new(
            inst(build, ctx)?,
            inst(probe, ctx)?,
            keys.clone(),
        )),
        OpSpec::PosHashJoin {
            build,
            probe,
            build_keys,
            probe_keys,
        } => Box::new(PosHashJoin::new(
            inst(build, ctx)?,
            inst(probe, ctx)?,
            build_keys.clone(),
            probe_keys.clone(),
        )),
        OpSpec::PosNLJoin {
            left,
            right,
            pred,
            left_attrs,
            right_attrs,
        } => Box::new(PosNLJoin::new(
            inst(left, ctx)?,
            inst(right, ctx)?,
            pred.clone(),
            left_attrs.clone(),
            right_attrs.clone(),
        )),
        OpSpec::HYScan {
            table,
            alias,
            fetch,
        } => Box::new(HYDataSource::new(table, alias, fetch.clone())),
        OpSpec::HYFilter {
            child,
            pred,
            fetch,
            combine,
            spec,
        } => Box::new(HYFilter::new(
            inst(child, ctx)?,
            pred.clone(),
            fetch.clone(),
            combine.clone(),
            *spec,
        )),
        OpSpec::HYProject { child, combine } => {
            Box::new(HYProject::new(inst(child, ctx)?, combine.clone()))
        }
        OpSpec::HYMaterialize {
            child,
            fetch,
            combine,
        } => Box::new(HYMaterialize::new(
            inst(child, ctx)?,
            fetch.clone(),
            combine.clone(),
        )),
        OpSpec::HYHashJoin {
            build,
            probe,
            build_keys,
            probe_keys,
            fetch_build,
            fetch_probe,
            combine,
            spec,
        } => Box::new(HYHashJoin::new(
            inst(build, ctx)?,
            inst(probe, ctx)?,
            build_keys.clone(),
            probe_keys.clone(),
            fetch_build.clone(),
            fetch_probe.clone(),
            combine.clone(),
            *spec,
        )),
        OpSpec::HYNLJoin {
            left,
            right,
            pred,
            pred_left,
            pred_right,
            fetch_left,
            fetch_right,
            combine,
            spec,
        } => Box::new(HYNestedLoopJoin::new(
            inst(left, ctx)?,
            inst(right, ctx)?,
            pred.clone(),
            pred_left.clone(),
            pred_right.clone(),
            fetch_left.clone(),
            fetch_right.clone(),
            combine.clone(),
            *spec,
        )),
        OpSpec::HYToTuple { child, attrs } => {
            Box::new(HYToTuple::new(inst(child, ctx)?, attrs.clone()))
        }
    };
    Ok(PlanOp::new(ctx, core))
}
