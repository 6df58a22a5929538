//! Limited-memory BFGS with a projected Armijo line search.
//!
//! The search direction comes from the standard two-loop recursion with the
//! initial inverse Hessian scaled by `s.y / y.y`. Pairs with non-positive
//! curvature are skipped; if the line search fails along the quasi-Newton
//! direction the history is dropped and steepest descent is tried once.

use std::collections::VecDeque;

use super::{backtrack, max_abs_diff, small_decrease, Problem, Run, RunResult, Status};

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn two_loop(history: &VecDeque<Pair>, grad: &[f64]) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let alpha = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (pair, alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = pair.rho * dot(&pair.y, &q);
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (alpha - beta) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub(super) fn run(run: &Run<'_>, problem: &mut dyn Problem, mut x: Vec<f64>, mut fx: f64) -> RunResult {
    let cfg = run.config;
    let mut grad = vec![0.0; x.len()];
    let mut next_grad = vec![0.0; x.len()];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(cfg.history_size);
    let mut values = vec![fx];
    let mut iterations = 0;

    problem.gradient(&x, &mut grad);
    let status = loop {
        if grad.iter().any(|g| !g.is_finite()) {
            break Status::NonFinite;
        }
        if grad.iter().all(|g| *g == 0.0) {
            break Status::Stationary;
        }
        if iterations == cfg.max_iterations {
            break Status::MaxIterations;
        }
        if let Some(stop) = run.stop.check() {
            break stop;
        }

        let mut direction = two_loop(&history, &grad);
        if dot(&direction, &grad) >= 0.0 {
            history.clear();
            direction = grad.iter().map(|g| -g).collect();
        }
        let first_step = if history.is_empty() {
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            cfg.initial_step * (1.0 / gmax).min(1.0)
        } else {
            1.0
        };
        let step = match backtrack(problem, &x, fx, &grad, &direction, first_step, run.bounds) {
            Ok(step) => step,
            Err(_) if !history.is_empty() => {
                history.clear();
                continue;
            }
            Err(_) => break Status::Stagnated,
        };
        iterations += 1;

        problem.gradient(&step.x, &mut next_grad);
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let moved = max_abs_diff(&step.x, &x);
        let before = fx;

        x = step.x;
        fx = step.value;
        std::mem::swap(&mut grad, &mut next_grad);
        values.push(fx);

        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == cfg.history_size {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }

        if moved < cfg.step_tolerance {
            break Status::StepTolerance;
        }
        if small_decrease(before, fx, cfg.objective_tolerance) {
            break Status::ObjectiveTolerance;
        }
    };
    (x, fx, iterations, status, values)
}
