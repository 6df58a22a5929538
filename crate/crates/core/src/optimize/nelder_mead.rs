//! Nelder-Mead simplex search with the standard coefficients (reflection 1,
//! expansion 2, contraction 0.5, shrink 0.5). Trial points are clamped into
//! the bounds before evaluation.

use super::{Problem, Run, RunResult, Status};
use crate::path::Bounds;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Coordinate offset for the initial simplex.
fn initial_offset(v: f64) -> f64 {
    (0.05 * v.abs()).max(0.05)
}

fn clamp(mut p: Vec<f64>, bounds: Option<&Bounds>) -> Vec<f64> {
    if let Some(b) = bounds {
        b.clamp(&mut p);
    }
    p
}

fn evaluate(problem: &mut dyn Problem, p: &[f64]) -> f64 {
    let v = problem.value(p);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// `base + coeff * (toward - base)`.
fn along(base: &[f64], toward: &[f64], coeff: f64) -> Vec<f64> {
    base.iter().zip(toward).map(|(b, t)| b + coeff * (t - b)).collect()
}

pub(super) fn run(run: &Run<'_>, problem: &mut dyn Problem, x0: Vec<f64>, f0: f64) -> RunResult {
    let cfg = run.config;
    let d = x0.len();

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.clone(), f0));
    for k in 0..d {
        let mut p = x0.clone();
        p[k] += initial_offset(x0[k]);
        let mut p = clamp(p, run.bounds);
        if p[k] == x0[k] {
            // pinned at an upper bound: step the other way
            p[k] -= initial_offset(x0[k]);
            p = clamp(p, run.bounds);
        }
        let v = evaluate(problem, &p);
        simplex.push((p, v));
    }

    let mut history = vec![f0];
    let mut iterations = 0;
    let status = loop {
        // stable sort keeps ties in insertion order
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        if iterations > 0 {
            history.push(best);
        }
        let worst = simplex[d].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < cfg.step_tolerance {
            break Status::StepTolerance;
        }
        if worst - best < cfg.objective_tolerance * (1.0 + best.abs()) {
            break Status::ObjectiveTolerance;
        }
        if iterations == cfg.max_iterations {
            break Status::MaxIterations;
        }
        if let Some(stop) = run.stop.check() {
            break stop;
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for (p, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / d as f64;
            }
        }
        let worst_point = simplex[d].0.clone();
        let reflected = clamp(along(&centroid, &worst_point, -REFLECT), run.bounds);
        let f_reflected = evaluate(problem, &reflected);

        if f_reflected < best {
            let expanded = clamp(along(&centroid, &reflected, EXPAND), run.bounds);
            let f_expanded = evaluate(problem, &expanded);
            simplex[d] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < simplex[d - 1].1 {
            simplex[d] = (reflected, f_reflected);
            continue;
        }
        let (contracted, limit) = if f_reflected < worst {
            (along(&centroid, &reflected, CONTRACT), f_reflected)
        } else {
            (along(&centroid, &worst_point, CONTRACT), worst)
        };
        let contracted = clamp(contracted, run.bounds);
        let f_contracted = evaluate(problem, &contracted);
        if f_contracted < limit {
            simplex[d] = (contracted, f_contracted);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let p = clamp(along(&anchor, &vertex.0, SHRINK), run.bounds);
            let v = evaluate(problem, &p);
            *vertex = (p, v);
        }
    };
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, iterations, status, history)
}
