use std::time::Instant;

use serde::Serialize;
use strobe_core::baselines::{gsgd_optimize, prr_optimize, single_thread_optimize, Scheme, SchemeOutcome};
use strobe_core::path::FullPathVector;
use strobe_core::scenarios::{build_scenario, initial_path, quality_metric};
use strobe_core::strobe::{strobe_optimize, EpochTrace};

use crate::plan::{Cell, ExperimentPlan};
use crate::records::RunRecord;

/// One epoch trace tagged with the run it belongs to; a line of the
/// JSON-lines trace output.
#[derive(Debug, Clone, Serialize)]
pub struct TraceLine<'a> {
    #[serde(flatten)]
    pub cell: &'a Cell,
    pub seed: u64,
    #[serde(flatten)]
    pub trace: &'a EpochTrace,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    /// Per-epoch traces; only Strobe produces them.
    pub traces: Vec<EpochTrace>,
    pub path: Option<FullPathVector>,
    pub cell: Cell,
}

impl RunOutput {
    pub fn trace_lines(&self) -> impl Iterator<Item = TraceLine<'_>> {
        let cell = &self.cell;
        self.traces.iter().map(move |trace| TraceLine {
            cell,
            seed: self.record.seed,
            trace,
        })
    }
}

/// Runs one seed of one cell. Failures are recorded in the returned record
/// rather than propagated.
pub fn run_cell_seed(plan: &ExperimentPlan, cell: &Cell, seed: u64) -> RunOutput {
    match try_run(plan, cell, seed) {
        Ok(out) => out,
        Err(e) => RunOutput {
            record: RunRecord::failed(cell, seed, e.to_string()),
            traces: Vec::new(),
            path: None,
            cell: *cell,
        },
    }
}

fn try_run(plan: &ExperimentPlan, cell: &Cell, seed: u64) -> strobe_core::Result<RunOutput> {
    let spec = plan.spec(cell, seed);
    let scenario = build_scenario(&spec)?;
    let config = plan.scheme_config(cell);
    let (model, start) = (&scenario.model, &scenario.initial);

    let clock = Instant::now();
    let (result, traces) = match cell.scheme {
        Scheme::Strobe => {
            let r = strobe_optimize(&config.base, model, start)?;
            let out = SchemeOutcome {
                path: r.path,
                outcome: r.outcome,
            };
            (out, r.traces)
        }
        Scheme::SingleThread => (single_thread_optimize(&config, model, start)?, Vec::new()),
        Scheme::Prr => {
            let generator = |s: u64| initial_path(&spec.with_seed(s));
            (prr_optimize(&config, model, &generator, seed)?, Vec::new())
        }
        Scheme::Gsgd => (gsgd_optimize(&config, model, start, seed)?, Vec::new()),
    };
    let wall_time = clock.elapsed().as_secs_f64();

    let record = RunRecord {
        scenario: cell.scenario,
        waypoints: cell.waypoints,
        scheme: cell.scheme,
        optimizer: cell.optimizer,
        workers: cell.workers,
        seed,
        wall_time,
        converged: result.outcome.converged,
        quality: quality_metric(&spec, &result.path)?,
        final_objective: result.outcome.final_objective,
        epochs: result.outcome.iterations,
        error: String::new(),
    };
    Ok(RunOutput {
        record,
        traces,
        path: Some(result.path),
        cell: *cell,
    })
}

/// Runs every cell and seed of the plan one after another, calling
/// `on_run` after each run.
pub fn run_experiment(plan: &ExperimentPlan, mut on_run: impl FnMut(&RunOutput)) -> Vec<RunRecord> {
    let mut records = Vec::new();
    for cell in plan.cells() {
        for seed in plan.seeds() {
            let out = run_cell_seed(plan, &cell, seed);
            on_run(&out);
            records.push(out.record);
        }
    }
    records
}
