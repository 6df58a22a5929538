use super::{backtrack, max_abs_diff, small_decrease, Problem, Run, RunResult, Status, Step};
use crate::error::Result;
use crate::path::Bounds;

/// One steepest-descent step with Armijo backtracking (factor 0.5,
/// sufficient-decrease coefficient 1e-4), starting from `initial_step`.
/// The accepted point never has a higher objective than `x`.
///
/// Fails with [`crate::Error::Stagnation`] when no step above `1e-16`
/// decreases the objective.
pub fn descent_step_backtracking(
    problem: &mut dyn Problem,
    x: &[f64],
    fx: f64,
    grad: &[f64],
    initial_step: f64,
    bounds: Option<&Bounds>,
) -> Result<Step> {
    let direction: Vec<f64> = grad.iter().map(|g| -g).collect();
    backtrack(problem, x, fx, grad, &direction, initial_step, bounds)
}

pub(super) fn run(run: &Run<'_>, problem: &mut dyn Problem, mut x: Vec<f64>, mut fx: f64) -> RunResult {
    let cfg = run.config;
    let mut grad = vec![0.0; x.len()];
    let mut history = vec![fx];
    let mut trial_step = cfg.initial_step;
    let mut iterations = 0;

    let status = loop {
        if iterations == cfg.max_iterations {
            break Status::MaxIterations;
        }
        if let Some(stop) = run.stop.check() {
            break stop;
        }
        problem.gradient(&x, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            break Status::NonFinite;
        }
        if grad.iter().all(|g| *g == 0.0) {
            break Status::Stationary;
        }
        let step = match descent_step_backtracking(problem, &x, fx, &grad, trial_step, run.bounds) {
            Ok(step) => step,
            Err(_) => break Status::Stagnated,
        };
        iterations += 1;
        let moved = max_abs_diff(&step.x, &x);
        let before = fx;
        x = step.x;
        fx = step.value;
        history.push(fx);
        // let the next line search try a longer step than the last one
        trial_step = 2.0 * step.step;

        if moved < cfg.step_tolerance {
            break Status::StepTolerance;
        }
        if small_decrease(before, fx, cfg.objective_tolerance) {
            break Status::ObjectiveTolerance;
        }
    };
    (x, fx, iterations, status, history)
}
