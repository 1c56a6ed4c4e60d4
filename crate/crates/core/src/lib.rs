//! Disk-based columnar SPJ engine with pluggable materialization strategies.
//!
//! The layers, bottom up: `storage` (pages, catalog, counting buffer pool),
//! `blocks` (positional / tuple / hybrid dataflow units), `exec` (Volcano
//! operators for the early, late, and ultra-late strategies), `hybrid`
//! (Fetch/Core/Combine operator triples), `planner` (per-strategy plan
//! construction and the per-attribute materialization schedule), `metrics`
//! (the counters the benchmarks assert on), and `workload` (deterministic
//! data generator).

pub mod blocks;
pub mod exec;
pub mod hybrid;
pub mod metrics;
pub mod planner;
pub mod storage;
pub mod workload;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Catalog(String),
    #[error("plan error: {0}")]
    Plan(String),
    #[error("execution error: {0}")]
    Exec(String),
    #[error("hash table memory budget exceeded: needs {needed} bytes, cap {cap}")]
    MemoryBudget { needed: u64, cap: u64 },
    #[error(transparent)]
    Ir(#[from] hmdb_ir::IrError),
}

impl EngineError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> EngineError {
        EngineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
