//! Local optimizers consumed by the meta-loop.
//!
//! Two derivative-based methods (projected gradient descent and L-BFGS, both
//! with Armijo backtracking) and one derivative-free method (Nelder-Mead).
//! Every method is a descent method: the accepted objective values form a
//! non-increasing sequence, recorded in [`OptimizerOutcome::history`].

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::Bounds;

mod gradient_descent;
mod lbfgs;
mod nelder_mead;

pub use gradient_descent::descent_step_backtracking;

/// Armijo sufficient-decrease coefficient.
pub const ARMIJO_C: f64 = 1e-4;
/// Step shrink factor during backtracking.
pub const BACKTRACK_FACTOR: f64 = 0.5;
/// Backtracking gives up below this step length.
pub const MIN_STEP: f64 = 1e-16;

/// An objective over `R^d`, optionally with a gradient.
pub trait Problem {
    fn value(&mut self, x: &[f64]) -> f64;

    fn has_gradient(&self) -> bool {
        false
    }

    /// Writes the gradient at `x` into `out`. Only called when
    /// [`Problem::has_gradient`] is true.
    fn gradient(&mut self, _x: &[f64], _out: &mut [f64]) {
        unreachable!("gradient requested from a problem that has none")
    }
}

/// Closure-backed [`Problem`].
pub struct FnProblem<F, G = fn(&[f64], &mut [f64])> {
    f: F,
    g: Option<G>,
}

impl<F: FnMut(&[f64]) -> f64> FnProblem<F> {
    pub fn new(f: F) -> Self {
        Self { f, g: None }
    }
}

impl<F, G> FnProblem<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], &mut [f64]),
{
    pub fn with_gradient(f: F, g: G) -> Self {
        Self { f, g: Some(g) }
    }
}

impl<F, G> Problem for FnProblem<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], &mut [f64]),
{
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn has_gradient(&self) -> bool {
        self.g.is_some()
    }

    fn gradient(&mut self, x: &[f64], out: &mut [f64]) {
        if let Some(g) = self.g.as_mut() {
            g(x, out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    GradientDescent,
    Lbfgs,
    NelderMead,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::GradientDescent, Algorithm::Lbfgs, Algorithm::NelderMead];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GradientDescent => "gradient-descent",
            Algorithm::Lbfgs => "l-bfgs",
            Algorithm::NelderMead => "nelder-mead",
        }
    }

    pub fn needs_gradient(self) -> bool {
        !matches!(self, Algorithm::NelderMead)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gradient-descent" | "gd" => Ok(Algorithm::GradientDescent),
            "l-bfgs" | "lbfgs" => Ok(Algorithm::Lbfgs),
            "nelder-mead" | "nm" => Ok(Algorithm::NelderMead),
            _ => Err(Error::UnknownName {
                kind: "optimizer",
                name: s.to_string(),
            }),
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    /// Stop when an accepted step moves no component further than this.
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the objective by less than
    /// `objective_tolerance * (1 + |f|)`.
    pub objective_tolerance: f64,
    /// Number of correction pairs kept by L-BFGS.
    pub history_size: usize,
    /// First trial step of the line search.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::GradientDescent,
            max_iterations: 30,
            step_tolerance: 1e-10,
            objective_tolerance: 1e-12,
            history_size: 8,
            initial_step: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !positive(self.step_tolerance) || !positive(self.objective_tolerance) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.history_size == 0 {
            return Err(Error::InvalidConfig("history_size must be at least 1".into()));
        }
        if !positive(self.initial_step) {
            return Err(Error::InvalidConfig("initial_step must be positive".into()));
        }
        Ok(())
    }
}

/// Why an optimizer run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Zero gradient, or an empty decision vector.
    Stationary,
    StepTolerance,
    ObjectiveTolerance,
    /// The line search could not decrease the objective with any step above
    /// [`MIN_STEP`].
    Stagnated,
    MaxIterations,
    Cancelled,
    TimeLimit,
    /// The objective returned NaN or infinity; the best finite point is kept.
    NonFinite,
}

impl Status {
    pub fn is_converged(self) -> bool {
        matches!(
            self,
            Status::Stationary | Status::StepTolerance | Status::ObjectiveTolerance | Status::Stagnated
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOutcome {
    pub final_values: Vec<f64>,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: Status,
    pub wall_time: Duration,
    /// Objective after each accepted iteration, starting with the initial
    /// value.
    pub history: Vec<f64>,
}

/// Cooperative stop conditions checked between iterations.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopSignal<'a> {
    pub cancel: Option<&'a AtomicBool>,
    pub deadline: Option<Instant>,
}

impl<'a> StopSignal<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_cancel(mut self, flag: &'a AtomicBool) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn check(&self) -> Option<Status> {
        if self.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Some(Status::Cancelled);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some(Status::TimeLimit);
        }
        None
    }
}

pub fn minimize(
    config: &OptimizerConfig,
    problem: &mut dyn Problem,
    x0: &[f64],
    bounds: Option<&Bounds>,
) -> Result<OptimizerOutcome> {
    minimize_with_stop(config, problem, x0, bounds, StopSignal::none())
}

pub fn minimize_with_stop(
    config: &OptimizerConfig,
    problem: &mut dyn Problem,
    x0: &[f64],
    bounds: Option<&Bounds>,
    stop: StopSignal<'_>,
) -> Result<OptimizerOutcome> {
    config.validate()?;
    if let Some(b) = bounds {
        if b.dim() != x0.len() {
            return Err(Error::DimensionMismatch {
                expected: x0.len(),
                actual: b.dim(),
            });
        }
    }
    if config.algorithm.needs_gradient() && !problem.has_gradient() {
        return Err(Error::MissingGradient(config.algorithm.name()));
    }
    let started = Instant::now();
    let f0 = problem.value(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    if x0.is_empty() {
        return Ok(OptimizerOutcome {
            final_values: Vec::new(),
            final_objective: f0,
            iterations: 0,
            converged: true,
            status: Status::Stationary,
            wall_time: started.elapsed(),
            history: vec![f0],
        });
    }
    let run = Run {
        config,
        bounds,
        stop,
    };
    let (x, fx, iterations, status, history) = match config.algorithm {
        Algorithm::GradientDescent => gradient_descent::run(&run, problem, x0.to_vec(), f0),
        Algorithm::Lbfgs => lbfgs::run(&run, problem, x0.to_vec(), f0),
        Algorithm::NelderMead => nelder_mead::run(&run, problem, x0.to_vec(), f0),
    };
    Ok(OptimizerOutcome {
        final_values: x,
        final_objective: fx,
        iterations,
        converged: status.is_converged(),
        status,
        wall_time: started.elapsed(),
        history,
    })
}

/// Per-call settings shared by the algorithm implementations.
struct Run<'a> {
    config: &'a OptimizerConfig,
    bounds: Option<&'a Bounds>,
    stop: StopSignal<'a>,
}

/// Final point, final value, iterations used, stop reason, value history.
type RunResult = (Vec<f64>, f64, usize, Status, Vec<f64>);

/// Accepted line-search step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub x: Vec<f64>,
    pub value: f64,
    pub step: f64,
}

/// Projected Armijo backtracking along `direction` from `x`.
pub(crate) fn backtrack(
    problem: &mut dyn Problem,
    x: &[f64],
    fx: f64,
    grad: &[f64],
    direction: &[f64],
    initial_step: f64,
    bounds: Option<&Bounds>,
) -> Result<Step> {
    let mut t = initial_step;
    let mut trial = vec![0.0; x.len()];
    while t >= MIN_STEP {
        for ((xt, xi), di) in trial.iter_mut().zip(x).zip(direction) {
            *xt = xi + t * di;
        }
        if let Some(b) = bounds {
            b.clamp(&mut trial);
        }
        let slope: f64 = grad.iter().zip(trial.iter().zip(x)).map(|(g, (a, b))| g * (a - b)).sum();
        if slope <= 0.0 {
            let ft = problem.value(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO_C * slope {
                return Ok(Step {
                    x: trial,
                    value: ft,
                    step: t,
                });
            }
        }
        t *= BACKTRACK_FACTOR;
    }
    Err(Error::Stagnation(MIN_STEP))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn small_decrease(before: f64, after: f64, tol: f64) -> bool {
    before - after < tol * (1.0 + before.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl Problem {
        let c2 = c.clone();
        FnProblem::with_gradient(
            move |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum(),
            move |x: &[f64], g: &mut [f64]| {
                for ((gi, xi), ci) in g.iter_mut().zip(x).zip(&c2) {
                    *gi = 2.0 * (xi - ci);
                }
            },
        )
    }

    fn rosenbrock() -> impl Problem {
        FnProblem::with_gradient(
            |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            |x: &[f64], g: &mut [f64]| {
                g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
                g[1] = 200.0 * (x[1] - x[0] * x[0]);
            },
        )
    }

    fn assert_monotone(history: &[f64]) {
        for w in history.windows(2) {
            assert!(w[1] <= w[0], "objective increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn gradient_descent_solves_quadratic() {
        let c = vec![1.0, -2.0, 0.5];
        let cfg = OptimizerConfig::new(Algorithm::GradientDescent).with_max_iterations(200);
        let out = minimize(&cfg, &mut quadratic(c.clone()), &[5.0, 5.0, -3.0], None).unwrap();
        assert!(max_abs_diff(&out.final_values, &c) < 1e-4);
        assert_monotone(&out.history);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let c = vec![0.0, 0.0];
        for alg in [Algorithm::GradientDescent, Algorithm::Lbfgs] {
            let cfg = OptimizerConfig::new(alg);
            let out = minimize(&cfg, &mut quadratic(c.clone()), &c, None).unwrap();
            assert!(out.converged);
            assert!(out.iterations <= 1);
            assert_eq!(out.final_values, c);
            assert_eq!(out.status, Status::Stationary);
        }
    }

    /// Coarse-to-fine grid search over a shrinking window; independent of
    /// any descent method.
    fn grid_refine(f: impl Fn(f64, f64) -> f64) -> (f64, f64, f64) {
        let (mut cx, mut cy, mut half) = (0.0, 0.0, 2.0);
        let mut best = (f64::INFINITY, cx, cy);
        for _ in 0..40 {
            for i in 0..=40 {
                for j in 0..=40 {
                    let x = cx - half + 2.0 * half * i as f64 / 40.0;
                    let y = cy - half + 2.0 * half * j as f64 / 40.0;
                    let v = f(x, y);
                    if v < best.0 {
                        best = (v, x, y);
                    }
                }
            }
            cx = best.1;
            cy = best.2;
            half *= 0.5;
        }
        best
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let (fmin, xmin, ymin) =
            grid_refine(|x, y| (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2));
        assert!(fmin < 1e-12);
        assert!((xmin - 1.0).abs() < 1e-5 && (ymin - 1.0).abs() < 1e-5);

        let cfg = OptimizerConfig::new(Algorithm::Lbfgs).with_max_iterations(500);
        let out = minimize(&cfg, &mut rosenbrock(), &[-1.2, 1.0], None).unwrap();
        assert!(out.final_objective < 1e-6, "{out:?}");
        assert!(out.iterations <= 500);
        assert!((out.final_values[0] - xmin).abs() < 1e-2);
        assert!((out.final_values[1] - ymin).abs() < 1e-2);
        assert_monotone(&out.history);
    }

    #[test]
    fn nelder_mead_solves_quadratic_without_gradient() {
        let mut p = FnProblem::new(|x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2));
        let cfg = OptimizerConfig::new(Algorithm::NelderMead).with_max_iterations(400);
        let out = minimize(&cfg, &mut p, &[1.0, 1.0], None).unwrap();
        assert!((out.final_values[0] - 0.3).abs() < 1e-4);
        assert!((out.final_values[1] + 0.7).abs() < 1e-4);
        assert_monotone(&out.history);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut p = FnProblem::new(|x: &[f64]| x[0] * x[0]);
        for alg in [Algorithm::GradientDescent, Algorithm::Lbfgs] {
            let err = minimize(&OptimizerConfig::new(alg), &mut p, &[1.0], None).unwrap_err();
            assert!(matches!(err, Error::MissingGradient(_)));
        }
    }

    #[test]
    fn bounds_are_respected() {
        let b = Bounds::uniform(2, 0.0, 1.0).unwrap();
        for alg in Algorithm::ALL {
            let cfg = OptimizerConfig::new(alg).with_max_iterations(300);
            let out = minimize(&cfg, &mut quadratic(vec![3.0, -2.0]), &[0.5, 0.5], Some(&b)).unwrap();
            assert!(b.contains(&out.final_values), "{alg}: {:?}", out.final_values);
            assert!((out.final_values[0] - 1.0).abs() < 1e-3, "{alg}");
            assert!(out.final_values[1].abs() < 1e-3, "{alg}");
        }
    }

    #[test]
    fn final_objective_matches_final_values() {
        for alg in Algorithm::ALL {
            let cfg = OptimizerConfig::new(alg).with_max_iterations(50);
            let mut p = rosenbrock();
            let out = minimize(&cfg, &mut p, &[-1.2, 1.0], None).unwrap();
            assert_eq!(p.value(&out.final_values), out.final_objective, "{alg}");
        }
    }

    #[test]
    fn cancellation_stops_run() {
        let flag = AtomicBool::new(true);
        let cfg = OptimizerConfig::new(Algorithm::GradientDescent).with_max_iterations(100);
        let out = minimize_with_stop(
            &cfg,
            &mut quadratic(vec![1.0]),
            &[0.0],
            None,
            StopSignal::none().with_cancel(&flag),
        )
        .unwrap();
        assert_eq!(out.status, Status::Cancelled);
        assert!(!out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let mut p = FnProblem::new(|_: &[f64]| f64::NAN);
        let cfg = OptimizerConfig::new(Algorithm::NelderMead);
        assert_eq!(minimize(&cfg, &mut p, &[0.0], None).unwrap_err(), Error::NonFiniteStart);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert_eq!("lbfgs".parse::<Algorithm>().unwrap(), Algorithm::Lbfgs);
        assert!("cobyla".parse::<Algorithm>().is_err());
    }

    #[test]
    fn invalid_config() {
        let cfg = OptimizerConfig {
            step_tolerance: 0.0,
            ..OptimizerConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = OptimizerConfig::default().with_max_iterations(0);
        assert!(cfg.validate().is_err());
    }
}
