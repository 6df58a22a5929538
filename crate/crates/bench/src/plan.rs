use serde::{Deserialize, Serialize};
use strobe_core::baselines::{Scheme, SchemeConfig};
use strobe_core::optimize::{Algorithm, OptimizerConfig};
use strobe_core::scenarios::{CircleGridField, ScenarioKind, ScenarioSpec, SerialChain, Weights};
use strobe_core::strobe::StrobeConfig;

use crate::{BenchError, Result};

/// A run matrix: the cross product of the five coordinate lists, each cell
/// run with seeds `base_seed .. base_seed + repetitions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioKind>,
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_optimizers")]
    pub optimizers: Vec<Algorithm>,
    pub workers: Vec<usize>,
    pub waypoints: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Per-run wall-clock limit in seconds.
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub scenario: ScenarioOverrides,
}

fn default_optimizers() -> Vec<Algorithm> {
    vec![Algorithm::GradientDescent]
}

fn default_repetitions() -> usize {
    20
}

fn default_time_limit() -> f64 {
    60.0
}

/// Budgets and tolerances shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub ell: usize,
    pub max_epochs: usize,
    pub path_tolerance: f64,
    pub objective_tolerance: f64,
    /// Iteration budget of each inner minimize call.
    pub inner_iterations: usize,
    pub window_length: Option<usize>,
    pub serialized_prr: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let base = StrobeConfig::default();
        Self {
            ell: base.ell,
            max_epochs: base.max_epochs,
            path_tolerance: base.path_tolerance,
            objective_tolerance: base.objective_tolerance,
            inner_iterations: base.inner.max_iterations,
            window_length: None,
            serialized_prr: false,
        }
    }
}

/// Optional replacements for scenario parameters, applied to every cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub weights: Option<Weights>,
    pub field: Option<CircleGridField>,
    pub chain: Option<SerialChain>,
    pub goal: Option<[f64; 4]>,
    pub distance: Option<f64>,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: ScenarioKind,
    pub waypoints: usize,
    pub scheme: Scheme,
    pub optimizer: Algorithm,
    pub workers: usize,
}

impl ExperimentPlan {
    /// A plan with a single cell and the default budgets.
    pub fn single(cell: Cell, repetitions: usize, base_seed: u64) -> Self {
        Self {
            scenarios: vec![cell.scenario],
            schemes: vec![cell.scheme],
            optimizers: vec![cell.optimizer],
            workers: vec![cell.workers],
            waypoints: vec![cell.waypoints],
            repetitions,
            base_seed,
            time_limit: default_time_limit(),
            settings: Settings::default(),
            scenario: ScenarioOverrides::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| BenchError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::Plan(m));
        if self.scenarios.is_empty()
            || self.schemes.is_empty()
            || self.optimizers.is_empty()
            || self.workers.is_empty()
            || self.waypoints.is_empty()
        {
            return fail("every coordinate list needs at least one entry".into());
        }
        if self.repetitions == 0 {
            return fail("repetitions must be positive".into());
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return fail(format!("time limit {} must be positive", self.time_limit));
        }
        if self.workers.contains(&0) {
            return fail("worker counts must be positive".into());
        }
        if let Some(w) = self.waypoints.iter().find(|w| **w < 2) {
            return fail(format!("waypoint count {w} is below 2"));
        }
        let probe = self.cells()[0];
        self.scheme_config(&probe).base.validate()?;
        for cell in self.cells() {
            self.spec(&cell, self.base_seed).validate()?;
        }
        Ok(())
    }

    /// All cells in run order: scenario, then waypoint count, scheme,
    /// optimizer and worker count.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &scenario in &self.scenarios {
            for &waypoints in &self.waypoints {
                for &scheme in &self.schemes {
                    for &optimizer in &self.optimizers {
                        for &workers in &self.workers {
                            cells.push(Cell {
                                scenario,
                                waypoints,
                                scheme,
                                optimizer,
                                workers,
                            });
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        let base = self.base_seed;
        (0..self.repetitions as u64).map(move |r| base.wrapping_add(r))
    }

    /// Scenario for one run. Depends only on the scenario, waypoint count and
    /// seed, so every cell sharing those starts from the same path.
    pub fn spec(&self, cell: &Cell, seed: u64) -> ScenarioSpec {
        let mut spec = ScenarioSpec::new(cell.scenario, cell.waypoints, seed);
        let o = &self.scenario;
        if let Some(w) = &o.weights {
            spec.weights = w.clone();
        }
        if let Some(f) = &o.field {
            spec.field = f.clone();
        }
        if let Some(c) = &o.chain {
            spec.chain = c.clone();
        }
        if let Some(g) = o.goal {
            spec.goal = g;
        }
        spec.distance = o.distance;
        spec.noise = o.noise;
        spec
    }

    pub fn scheme_config(&self, cell: &Cell) -> SchemeConfig {
        let s = &self.settings;
        let mut inner = OptimizerConfig::new(cell.optimizer);
        inner.max_iterations = s.inner_iterations;
        let base = StrobeConfig {
            workers: cell.workers,
            ell: s.ell,
            max_epochs: s.max_epochs,
            path_tolerance: s.path_tolerance,
            objective_tolerance: s.objective_tolerance,
            inner,
            time_limit: Some(self.time_limit),
        };
        SchemeConfig {
            scheme: cell.scheme,
            base,
            window_length: s.window_length,
            serialized: s.serialized_prr,
        }
    }
}
