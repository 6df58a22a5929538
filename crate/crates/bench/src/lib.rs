//! Experiment harness: seeded run matrices over scenarios, schemes,
//! optimizers, worker counts and path lengths, with CSV/JSON-lines output,
//! per-cell summaries and SVG renders of 2-D paths.

pub mod aggregate;
pub mod plan;
pub mod records;
pub mod render;
pub mod runner;

pub use aggregate::{aggregate, CellSummary, Stat};
pub use plan::{Cell, ExperimentPlan, ScenarioOverrides};
pub use records::{read_csv, write_csv, RunRecord};
pub use render::{render_2d, write_svg};
pub use runner::{run_cell_seed, run_experiment, RunOutput, TraceLine};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot parse plan: {0}")]
    Plan(String),
    #[error("{0}")]
    Core(#[from] strobe_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot aggregate an empty set of records")]
    EmptyCell,
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
