//! Plan construction. A query plus a strategy (plus, for hybrid, a
//! materialization schedule) deterministically yields a `PlanSpec`; the
//! spec renders to a signature without touching any dataset and
//! instantiates into a runnable operator tree against a catalog.

mod build;
mod schedule;
mod spec;

pub use build::{build_plan, build_plan_with, PlanOptions};
pub use schedule::{entry_edges, select_attrs, MatPoint, MaterializationSchedule};
pub use spec::{OpSpec, PlanSpec};

use crate::{EngineError, Result};

/// When attribute values leave position-land and become real tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    /// Tuples from the very start: scan, materialize, then filter and join
    /// on rows.
    Early,
    /// Filter on positions, materialize each table right before its first
    /// join.
    Late,
    /// Positions all the way through the joins; one materialization at the
    /// top, at final result positions.
    UltraLate,
    /// Per-attribute points set by a `MaterializationSchedule`.
    Hybrid,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Early,
        StrategyKind::Late,
        StrategyKind::UltraLate,
        StrategyKind::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Early => "early",
            StrategyKind::Late => "late",
            StrategyKind::UltraLate => "ultralate",
            StrategyKind::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<StrategyKind> {
        match s {
            "early" => Ok(StrategyKind::Early),
            "late" => Ok(StrategyKind::Late),
            "ultralate" => Ok(StrategyKind::UltraLate),
            "hybrid" => Ok(StrategyKind::Hybrid),
            _ => Err(EngineError::Plan(format!(
                "unknown strategy '{s}' (expected early, late, ultralate, or hybrid)"
            ))),
        }
    }
}
