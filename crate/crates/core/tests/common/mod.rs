#![allow(dead_code)]

use std::sync::Arc;

use hmdb_core::exec::{run_plan, ExecCtx};
use hmdb_core::metrics::{snapshot, QueryMetrics};
use hmdb_core::planner::PlanSpec;
use hmdb_core::storage::{open_catalog, BufferPool, Catalog};
use hmdb_core::workload::{generate, Sf};
use hmdb_ir::{QueryIR, Row};
use tempfile::TempDir;

/// Generate a dataset into a temp dir and open its catalog. Keep the
/// TempDir alive for as long as the catalog is in use.
pub fn gen_dataset(sf: &str, seed: u64) -> (TempDir, Arc<Catalog>) {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), &Sf::parse(sf).unwrap(), seed).unwrap();
    let catalog = open_catalog(dir.path()).unwrap();
    (dir, Arc::new(catalog))
}

/// Fresh context with a cold pool of the given capacity.
pub fn fresh_ctx(catalog: &Arc<Catalog>, pool_pages: usize) -> ExecCtx {
    ExecCtx::new(Arc::new(BufferPool::new(pool_pages)), Arc::clone(catalog))
}

/// Instantiate and drain a plan, returning its rows and the per-query
/// metrics snapshot.
pub fn run(spec: &PlanSpec, query: &QueryIR, ctx: &ExecCtx) -> (Vec<Row>, QueryMetrics) {
    let mut root = spec.instantiate(ctx).expect("instantiate");
    let rows = run_plan(&mut root, ctx, &query.select).expect("run");
    let metrics = snapshot(ctx).expect("snapshot");
    (rows, metrics)
}
