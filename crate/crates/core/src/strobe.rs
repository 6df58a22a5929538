//! The Strobe meta-loop.
//!
//! The path is split once into alternating blue/red pods. Each epoch
//! optimizes every blue pod concurrently, then every red pod concurrently,
//! and finally checks whole-path convergence. Within a sub-epoch each pod
//! task copies the shared path, minimizes the restricted objective over its
//! own index range and writes that range back when it finishes. Same-color
//! pods are at least `ell` waypoints apart and no objective term reads
//! further than `ell` indices, so no task reads what another concurrent task
//! writes and the result does not depend on task order.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ObjectiveModel, RestrictedProblem};
use crate::optimize::{minimize_with_stop, OptimizerConfig, OptimizerOutcome, Status, StopSignal};
use crate::path::FullPathVector;
use crate::pods::{split_path, Color, Pod, PodPartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrobeConfig {
    pub workers: usize,
    /// Minimum pod length and same-color buffer.
    pub ell: usize,
    pub max_epochs: usize,
    /// Converged when no waypoint component moves further than this in an
    /// epoch.
    pub path_tolerance: f64,
    /// Converged when the full objective changes by less than
    /// `objective_tolerance * (1 + |f|)` in an epoch.
    pub objective_tolerance: f64,
    pub inner: OptimizerConfig,
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
}

impl Default for StrobeConfig {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, usize::from),
            ell: 2,
            max_epochs: 500,
            path_tolerance: 1e-3,
            objective_tolerance: 1e-6,
            inner: OptimizerConfig::default(),
            time_limit: None,
        }
    }
}

impl StrobeConfig {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.ell == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig(
                "workers, ell and max_epochs must be positive".into(),
            ));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.path_tolerance) || !positive(self.objective_tolerance) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| !positive(t)) {
            return Err(Error::InvalidConfig("time limit must be positive".into()));
        }
        self.inner.validate()
    }

    pub(crate) fn deadline(&self, started: Instant) -> Option<Instant> {
        self.time_limit.map(|t| started + Duration::from_secs_f64(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub objective_after: f64,
    pub max_displacement: f64,
    /// Seconds spent in the blue and red sub-epochs.
    pub sub_epoch_wall_times: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct StrobeResult {
    pub path: FullPathVector,
    /// `iterations` counts epochs; `history` holds the full objective before
    /// the first epoch and after each one.
    pub outcome: OptimizerOutcome,
    pub traces: Vec<EpochTrace>,
    pub partition: PodPartition,
}

/// Result of one pod task.
#[derive(Debug, Clone)]
pub struct PodSolution {
    pub pod: Pod,
    /// New states for waypoints `pod.start..=pod.end`, flattened.
    pub block: Vec<f64>,
    pub outcome: OptimizerOutcome,
}

/// Whole-path convergence test applied after each epoch.
pub fn check_convergence(
    prev: &FullPathVector,
    next: &FullPathVector,
    f_prev: f64,
    f_next: f64,
    config: &StrobeConfig,
) -> bool {
    let moved = prev.max_displacement(next).unwrap_or(f64::INFINITY);
    moved < config.path_tolerance
        || (f_next - f_prev).abs() < config.objective_tolerance * (1.0 + f_prev.abs())
}

/// Minimizes the restricted objective over one pod's unfrozen components,
/// holding the rest of `snapshot` fixed.
pub fn optimize_pod(
    model: &ObjectiveModel,
    snapshot: &FullPathVector,
    pod: &Pod,
    inner: &OptimizerConfig,
) -> Result<PodSolution> {
    optimize_pod_owned(model, snapshot.clone(), pod, inner, StopSignal::none())
}

pub(crate) fn optimize_pod_owned(
    model: &ObjectiveModel,
    snapshot: FullPathVector,
    pod: &Pod,
    inner: &OptimizerConfig,
    stop: StopSignal<'_>,
) -> Result<PodSolution> {
    let mut problem = RestrictedProblem::new(model, snapshot, pod.start, pod.end)?;
    let x0 = problem.initial_values();
    let bounds = problem.bounds();
    let outcome = minimize_with_stop(inner, &mut problem, &x0, bounds.as_ref(), stop)?;
    problem.load(&outcome.final_values);
    let n = model.dim();
    let block = problem.path().as_flat()[pod.start * n..(pod.end + 1) * n].to_vec();
    Ok(PodSolution {
        pod: *pod,
        block,
        outcome,
    })
}

pub(crate) fn write_block(path: &mut FullPathVector, start: usize, block: &[f64]) {
    let n = path.dim();
    for (k, q) in block.chunks_exact(n).enumerate() {
        let i = start + k;
        if !path.is_frozen(i) {
            path.set_waypoint(i, q).expect("block lies inside the path");
        }
    }
}

pub fn strobe_optimize(
    config: &StrobeConfig,
    model: &ObjectiveModel,
    path: &FullPathVector,
) -> Result<StrobeResult> {
    strobe_optimize_with(config, model, path, |_| {})
}

/// As [`strobe_optimize`], calling `on_epoch` after every epoch.
pub fn strobe_optimize_with(
    config: &StrobeConfig,
    model: &ObjectiveModel,
    path: &FullPathVector,
    mut on_epoch: impl FnMut(&EpochTrace),
) -> Result<StrobeResult> {
    config.validate()?;
    model.check_path(path)?;
    let reach = model.stencil_radius();
    if reach > config.ell {
        return Err(Error::StencilExceedsBuffer {
            reach,
            ell: config.ell,
        });
    }
    let partition = split_path(path.len(), config.workers, config.ell)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::WorkerFailed {
            epoch: 0,
            message: e.to_string(),
        })?;
    let started = Instant::now();
    let deadline = config.deadline(started);
    let stop = StopSignal::none().with_deadline(deadline);
    let colors = [
        partition.pods_of_color(Color::Blue),
        partition.pods_of_color(Color::Red),
    ];

    let shared = Mutex::new(path.clone());
    let mut f_prev = model.eval_full(path)?;
    let mut history = vec![f_prev];
    let mut best = (f_prev, path.clone());
    let mut traces = Vec::new();
    let mut status = Status::MaxIterations;

    for epoch in 1..=config.max_epochs {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            status = Status::TimeLimit;
            break;
        }
        let prev = shared.lock().expect("path lock").clone();
        let mut times = [0.0; 2];
        for (slot, pods) in colors.iter().enumerate() {
            let t = Instant::now();
            pool.install(|| {
                pods.par_iter().try_for_each(|pod| -> Result<()> {
                    let snapshot = shared.lock().expect("path lock").clone();
                    let solved = optimize_pod_owned(model, snapshot, pod, &config.inner, stop)?;
                    let mut live = shared.lock().expect("path lock");
                    write_block(&mut live, pod.start, &solved.block);
                    Ok(())
                })
            })
            .map_err(|e| Error::WorkerFailed {
                epoch,
                message: e.to_string(),
            })?;
            times[slot] = t.elapsed().as_secs_f64();
        }
        let next = shared.lock().expect("path lock").clone();
        let f_next = model.eval_full(&next)?;
        let trace = EpochTrace {
            epoch,
            objective_after: f_next,
            max_displacement: prev.max_displacement(&next)?,
            sub_epoch_wall_times: times,
        };
        on_epoch(&trace);
        traces.push(trace);
        history.push(f_next);
        let done = check_convergence(&prev, &next, f_prev, f_next, config);
        if f_next < best.0 {
            best = (f_next, next);
        }
        if done {
            status = if traces.last().is_some_and(|t| t.max_displacement < config.path_tolerance) {
                Status::StepTolerance
            } else {
                Status::ObjectiveTolerance
            };
            break;
        }
        f_prev = f_next;
    }

    let mut final_path = shared.into_inner().expect("path lock");
    let mut final_objective = model.eval_full(&final_path)?;
    if status == Status::TimeLimit && best.0 < final_objective {
        (final_objective, final_path) = best;
    }
    let outcome = OptimizerOutcome {
        final_values: final_path.as_flat().to_vec(),
        final_objective,
        iterations: traces.len(),
        converged: status.is_converged(),
        status,
        wall_time: started.elapsed(),
        history,
    };
    Ok(StrobeResult {
        path: final_path,
        outcome,
        traces,
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{PullToTarget, Smoothness, Term};
    use crate::optimize::{minimize, Algorithm};

    fn pull_model(target: f64) -> ObjectiveModel {
        ObjectiveModel::new(1)
            .with_term(Term::interior("pull", 1.0, PullToTarget { target: vec![target] }))
            .with_term(Term::interior("v", 0.1, Smoothness::new(1).unwrap()))
    }

    fn line(values: &[f64]) -> FullPathVector {
        FullPathVector::new(1, values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    #[test]
    fn convergence_rule() {
        let cfg = StrobeConfig::default();
        let p = line(&[0.0, 1.0, 2.0]);
        assert!(check_convergence(&p, &p, 1.0, 5.0, &cfg));
        let mut q = p.clone();
        q.set_waypoint(1, &[1.0 + 10.0 * cfg.path_tolerance]).unwrap();
        assert!(!check_convergence(&p, &q, 1.0, 5.0, &cfg));
        assert!(check_convergence(&p, &q, 100.0, 100.0 + 1e-9, &cfg));
    }

    #[test]
    fn frozen_pod_is_left_alone() {
        let mut p = line(&[0.0, 3.0, 1.0, 2.0]);
        p.freeze(1).unwrap();
        p.freeze(2).unwrap();
        let pod = Pod::new(1, 2, Color::Blue);
        let sol = optimize_pod(&pull_model(0.0), &p, &pod, &OptimizerConfig::default()).unwrap();
        assert_eq!(sol.block, vec![3.0, 1.0]);
    }

    #[test]
    fn single_waypoint_pod_reaches_target() {
        let model = ObjectiveModel::new(2).with_term(Term::interior(
            "pull",
            1.0,
            PullToTarget { target: vec![0.3, -0.2] },
        ));
        let p = FullPathVector::new(2, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::GradientDescent).with_max_iterations(100);
        let sol = optimize_pod(&model, &p, &Pod::new(1, 1, Color::Red), &cfg).unwrap();
        assert!((sol.block[0] - 0.3).abs() < 1e-4 && (sol.block[1] + 0.2).abs() < 1e-4);
    }

    #[test]
    fn single_pod_matches_direct_minimize() {
        let model = pull_model(0.5);
        let mut p = line(&[0.0, 2.0, -1.0]);
        p.freeze(0).unwrap();
        let cfg = StrobeConfig {
            workers: 4,
            ell: 3,
            max_epochs: 1,
            ..StrobeConfig::default()
        };
        let res = strobe_optimize(&cfg, &model, &p).unwrap();
        assert_eq!(res.partition.len(), 1);

        let mut direct = RestrictedProblem::new(&model, p.clone(), 0, 2).unwrap();
        let x0 = direct.initial_values();
        let out = minimize(&cfg.inner, &mut direct, &x0, None).unwrap();
        direct.load(&out.final_values);
        assert_eq!(direct.path(), &res.path);
    }

    #[test]
    fn stationary_path_converges_in_one_epoch() {
        let model = ObjectiveModel::new(1).with_term(Term::interior("pull", 1.0, PullToTarget { target: vec![0.0] }));
        let p = line(&[0.0; 12]);
        let cfg = StrobeConfig::default().with_workers(2);
        let res = strobe_optimize(&cfg, &model, &p).unwrap();
        assert_eq!(res.traces.len(), 1);
        assert_eq!(res.traces[0].max_displacement, 0.0);
        assert!(res.outcome.converged);
    }

    #[test]
    fn rejects_buffer_shorter_than_stencil() {
        let model = ObjectiveModel::new(1).with_term(Term::interior("a", 1.0, Smoothness::new(2).unwrap()));
        let cfg = StrobeConfig {
            ell: 1,
            ..StrobeConfig::default()
        };
        let err = strobe_optimize(&cfg, &model, &line(&[0.0; 8])).unwrap_err();
        assert_eq!(err, Error::StencilExceedsBuffer { reach: 2, ell: 1 });
    }

    #[test]
    fn frozen_endpoints_never_move() {
        let model = pull_model(5.0);
        let mut p = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        p.freeze(0).unwrap();
        p.freeze(9).unwrap();
        let res = strobe_optimize(&StrobeConfig::default().with_workers(3), &model, &p).unwrap();
        assert_eq!(res.path.waypoint(0), &[0.0]);
        assert_eq!(res.path.waypoint(9), &[9.0]);
        assert!(res.outcome.final_objective < model.eval_full(&p).unwrap());
    }
}
