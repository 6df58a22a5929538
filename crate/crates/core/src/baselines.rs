//! Reference schemes compared against Strobe: one full-path minimize call,
//! parallel random restarts (PRR), and uncoordinated random-window descent
//! (GSGD).

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ObjectiveModel, RestrictedProblem};
use crate::optimize::{minimize_with_stop, OptimizerConfig, OptimizerOutcome, Status, StopSignal};
use crate::path::FullPathVector;
use crate::pods::{split_path, Color, Pod};
use crate::strobe::{check_convergence, optimize_pod_owned, strobe_optimize, write_block, StrobeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Strobe,
    SingleThread,
    Prr,
    Gsgd,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Self::Strobe, Self::SingleThread, Self::Prr, Self::Gsgd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Strobe => "strobe",
            Self::SingleThread => "single",
            Self::Prr => "prr",
            Self::Gsgd => "gsgd",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "single-thread" {
            return Ok(Self::SingleThread);
        }
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "scheme",
                name: s.to_owned(),
            })
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> Self {
        s.name().to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Workers, budgets, tolerances and the inner optimizer, shared by all
    /// schemes.
    #[serde(flatten)]
    pub base: StrobeConfig,
    /// GSGD window length; defaults to the longest pod Strobe would use.
    #[serde(default)]
    pub window_length: Option<usize>,
    /// Run PRR workers one after another on the calling thread.
    #[serde(default)]
    pub serialized: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, base: StrobeConfig) -> Self {
        Self {
            scheme,
            base,
            window_length: None,
            serialized: false,
        }
    }

    /// Inner settings for a full-path run: the per-call iteration budget
    /// times `max_epochs`, stopping on the scheme-level objective tolerance.
    pub fn full_path_inner(&self) -> OptimizerConfig {
        let mut inner = self.base.inner.clone();
        inner.max_iterations = inner.max_iterations.saturating_mul(self.base.max_epochs);
        inner.objective_tolerance = self.base.objective_tolerance;
        inner
    }
}

/// Final path and outcome of any scheme.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub path: FullPathVector,
    pub outcome: OptimizerOutcome,
}

fn full_path_run(
    config: &SchemeConfig,
    model: &ObjectiveModel,
    path: FullPathVector,
    stop: StopSignal<'_>,
) -> Result<SchemeOutcome> {
    let last = path.last_index();
    let mut problem = RestrictedProblem::new(model, path, 0, last)?;
    let x0 = problem.initial_values();
    let bounds = problem.bounds();
    let outcome = minimize_with_stop(&config.full_path_inner(), &mut problem, &x0, bounds.as_ref(), stop)?;
    problem.load(&outcome.final_values);
    let path = problem.into_path();
    let outcome = OptimizerOutcome {
        final_values: path.as_flat().to_vec(),
        ..outcome
    };
    Ok(SchemeOutcome { path, outcome })
}

pub fn run_strobe(config: &SchemeConfig, model: &ObjectiveModel, path: &FullPathVector) -> Result<SchemeOutcome> {
    let result = strobe_optimize(&config.base, model, path)?;
    Ok(SchemeOutcome {
        path: result.path,
        outcome: result.outcome,
    })
}

/// One minimize call over every unfrozen component of the path.
pub fn single_thread_optimize(
    config: &SchemeConfig,
    model: &ObjectiveModel,
    path: &FullPathVector,
) -> Result<SchemeOutcome> {
    config.base.validate()?;
    model.check_path(path)?;
    let deadline = config.base.deadline(Instant::now());
    full_path_run(config, model, path.clone(), StopSignal::none().with_deadline(deadline))
}

/// Picks the PRR result: the claimed winner if any run converged, otherwise
/// the lowest final objective (earliest index on ties).
fn pick(mut runs: Vec<SchemeOutcome>, winner: Option<usize>) -> SchemeOutcome {
    let index = winner.unwrap_or_else(|| {
        (0..runs.len())
            .min_by(|&i, &j| runs[i].outcome.final_objective.total_cmp(&runs[j].outcome.final_objective))
            .expect("at least one worker")
    });
    runs.swap_remove(index)
}

/// Full-path runs from initial conditions `generator(seed)`,
/// `generator(seed + 1)`, ... on `workers` threads. The first run to converge
/// claims the result and cancels the others.
///
/// With `serialized` set the runs execute one after another without
/// cancellation and the winner is the converged run with the fewest
/// iterations, which is the run that would finish first if all of them were
/// stepped round-robin.
pub fn prr_optimize(
    config: &SchemeConfig,
    model: &ObjectiveModel,
    generator: &(dyn Fn(u64) -> Result<FullPathVector> + Sync),
    seed: u64,
) -> Result<SchemeOutcome> {
    config.base.validate()?;
    let workers = config.base.workers;
    let started = Instant::now();
    let deadline = config.base.deadline(started);
    let starts = (0..workers as u64)
        .map(|k| generator(seed.wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    for p in &starts {
        model.check_path(p)?;
    }

    let (runs, winner) = if config.serialized {
        let stop = StopSignal::none().with_deadline(deadline);
        let runs = starts
            .into_iter()
            .map(|p| full_path_run(config, model, p, stop))
            .collect::<Result<Vec<_>>>()?;
        let winner = (0..runs.len())
            .filter(|&i| runs[i].outcome.converged)
            .min_by_key(|&i| runs[i].outcome.iterations);
        (runs, winner)
    } else {
        let cancel = AtomicBool::new(false);
        let slot = Mutex::new(None);
        let stop = StopSignal::none().with_cancel(&cancel).with_deadline(deadline);
        let runs = std::thread::scope(|scope| {
            let handles: Vec<_> = starts
                .into_iter()
                .enumerate()
                .map(|(k, p)| {
                    let (cancel, slot) = (&cancel, &slot);
                    scope.spawn(move || {
                        let run = full_path_run(config, model, p, stop)?;
                        if run.outcome.converged {
                            let mut claimed = slot.lock().expect("winner slot");
                            if claimed.is_none() {
                                *claimed = Some(k);
                                cancel.store(true, Ordering::Relaxed);
                            }
                        }
                        Ok(run)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::WorkerFailed { epoch: 0, message: "PRR worker panicked".into() })))
                .collect::<Result<Vec<_>>>()
        })?;
        (runs, slot.into_inner().expect("winner slot"))
    };

    let mut chosen = pick(runs, winner);
    chosen.outcome.converged = winner.is_some();
    chosen.outcome.wall_time = started.elapsed();
    Ok(chosen)
}

fn worker_seed(seed: u64, worker: usize) -> u64 {
    seed ^ (worker as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Workers repeatedly optimize uniformly random windows of consecutive
/// waypoints against the live shared path and write them back on
/// completion, with no coordination between overlapping windows. A
/// coordinator checks whole-path convergence after every `workers`
/// completed windows. The budget is `max_epochs` times the number of pods
/// Strobe would use, counted in windows.
///
/// `outcome.iterations` reports completed windows divided by that pod
/// count, rounded up.
pub fn gsgd_optimize(
    config: &SchemeConfig,
    model: &ObjectiveModel,
    path: &FullPathVector,
    seed: u64,
) -> Result<SchemeOutcome> {
    let base = &config.base;
    base.validate()?;
    model.check_path(path)?;
    let partition = split_path(path.len(), base.workers, base.ell)?;
    let window = config.window_length.unwrap_or_else(|| partition.max_pod_len());
    if window == 0 || window > path.len() {
        return Err(Error::InvalidConfig(format!(
            "window length {window} must lie in 1..={}",
            path.len()
        )));
    }
    let per_epoch = partition.len();
    let budget = base.max_epochs.saturating_mul(per_epoch);
    let started = Instant::now();
    let deadline = base.deadline(started);

    let shared = Mutex::new(path.clone());
    let claimed = AtomicUsize::new(0);
    let halt = AtomicBool::new(false);
    let stop = StopSignal::none().with_cancel(&halt).with_deadline(deadline);
    let (tx, rx) = mpsc::channel::<Result<()>>();

    let mut f_prev = model.eval_full(path)?;
    let mut history = vec![f_prev];
    let mut prev = path.clone();
    let mut best = (f_prev, path.clone());
    let mut completed = 0usize;
    let mut status = Status::MaxIterations;
    let mut failure = None;

    std::thread::scope(|scope| {
        for k in 0..base.workers {
            let tx = tx.clone();
            let (shared, claimed, halt) = (&shared, &claimed, &halt);
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(seed, k));
                while !halt.load(Ordering::Relaxed) && claimed.fetch_add(1, Ordering::Relaxed) < budget {
                    let start = rng.random_range(0..=path.len() - window);
                    let pod = Pod::new(start, start + window - 1, Color::Blue);
                    let snapshot = shared.lock().expect("path lock").clone();
                    let done = optimize_pod_owned(model, snapshot, &pod, &base.inner, stop).map(|sol| {
                        let mut live = shared.lock().expect("path lock");
                        write_block(&mut live, pod.start, &sol.block);
                    });
                    let failed = done.is_err();
                    if tx.send(done).is_err() || failed {
                        break;
                    }
                }
            });
        }
        drop(tx);

        for message in rx {
            if let Err(e) = message {
                failure.get_or_insert(e);
                halt.store(true, Ordering::Relaxed);
                continue;
            }
            completed += 1;
            if halt.load(Ordering::Relaxed) || !completed.is_multiple_of(base.workers) {
                continue;
            }
            let next = shared.lock().expect("path lock").clone();
            let f_next = model.eval_full(&next).unwrap_or(f64::INFINITY);
            history.push(f_next);
            let done = check_convergence(&prev, &next, f_prev, f_next, base);
            if f_next < best.0 {
                best = (f_next, next.clone());
            }
            if done {
                status = if prev.max_displacement(&next).is_ok_and(|d| d < base.path_tolerance) {
                    Status::StepTolerance
                } else {
                    Status::ObjectiveTolerance
                };
                halt.store(true, Ordering::Relaxed);
            } else if deadline.is_some_and(|d| Instant::now() >= d) {
                status = Status::TimeLimit;
                halt.store(true, Ordering::Relaxed);
            }
            prev = next;
            f_prev = f_next;
        }
    });
    if let Some(e) = failure {
        return Err(Error::WorkerFailed {
            epoch: completed.div_ceil(per_epoch),
            message: e.to_string(),
        });
    }

    let mut final_path = shared.into_inner().expect("path lock");
    let mut final_objective = model.eval_full(&final_path)?;
    if !status.is_converged() && best.0 < final_objective {
        (final_objective, final_path) = best;
    }
    let outcome = OptimizerOutcome {
        final_values: final_path.as_flat().to_vec(),
        final_objective,
        iterations: completed.div_ceil(per_epoch),
        converged: status.is_converged(),
        status,
        wall_time: started.elapsed(),
        history,
    };
    Ok(SchemeOutcome {
        path: final_path,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{PullToTarget, Smoothness, Term};
    use crate::optimize::Algorithm;
    use crate::path::{generate_initial_path, Bounds};

    fn model() -> ObjectiveModel {
        ObjectiveModel::new(2)
            .with_term(Term::interior("pull", 1.0, PullToTarget { target: vec![0.4, 0.6] }))
            .with_term(Term::interior("v", 0.1, Smoothness::new(1).unwrap()))
            .with_bounds(Bounds::uniform(2, 0.0, 1.0).unwrap())
            .unwrap()
    }

    fn start(seed: u64) -> Result<FullPathVector> {
        generate_initial_path(&Bounds::uniform(2, 0.0, 1.0).unwrap(), 0.5, 15, 0.05, seed)
    }

    fn config(scheme: Scheme, workers: usize) -> SchemeConfig {
        let mut base = StrobeConfig::default().with_workers(workers);
        base.inner = OptimizerConfig::new(Algorithm::Lbfgs);
        SchemeConfig::new(scheme, base)
    }

    #[test]
    fn scheme_names() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("single-thread".parse::<Scheme>().unwrap(), Scheme::SingleThread);
        assert!("sgd".parse::<Scheme>().is_err());
    }

    #[test]
    fn single_thread_reaches_quadratic_minimum() {
        let m = ObjectiveModel::new(2).with_term(Term::interior("pull", 1.0, PullToTarget { target: vec![0.4, 0.6] }));
        let p = FullPathVector::new(2, vec![vec![0.0, 0.0]; 6]).unwrap();
        let r = single_thread_optimize(&config(Scheme::SingleThread, 1), &m, &p).unwrap();
        for q in r.path.waypoints() {
            assert!((q[0] - 0.4).abs() < 1e-4 && (q[1] - 0.6).abs() < 1e-4);
        }
        assert!(r.outcome.converged);
    }

    #[test]
    fn single_thread_at_minimum_returns_immediately() {
        let p = FullPathVector::new(2, vec![vec![0.4, 0.6]; 5]).unwrap();
        let r = single_thread_optimize(&config(Scheme::SingleThread, 1), &model(), &p).unwrap();
        assert_eq!(r.outcome.iterations, 0);
        assert!(r.outcome.converged);
        assert_eq!(r.path, p);
    }

    #[test]
    fn prr_with_one_worker_is_single_thread() {
        let cfg = config(Scheme::Prr, 1);
        let prr = prr_optimize(&cfg, &model(), &start, 7).unwrap();
        let single = single_thread_optimize(&cfg, &model(), &start(7).unwrap()).unwrap();
        assert_eq!(prr.path, single.path);
        assert_eq!(prr.outcome.final_objective, single.outcome.final_objective);
    }

    #[test]
    fn prr_converges_on_convex_model() {
        let r = prr_optimize(&config(Scheme::Prr, 3), &model(), &start, 0).unwrap();
        assert!(r.outcome.converged);
    }

    #[test]
    fn serialized_prr_is_reproducible() {
        let mut cfg = config(Scheme::Prr, 4);
        cfg.serialized = true;
        let a = prr_optimize(&cfg, &model(), &start, 11).unwrap();
        let b = prr_optimize(&cfg, &model(), &start, 11).unwrap();
        assert_eq!(a.path, b.path);
        assert_eq!(a.outcome.iterations, b.outcome.iterations);
    }

    #[test]
    fn gsgd_leaves_stationary_path_alone() {
        let p = FullPathVector::new(2, vec![vec![0.4, 0.6]; 12]).unwrap();
        let r = gsgd_optimize(&config(Scheme::Gsgd, 3), &model(), &p, 5).unwrap();
        assert_eq!(r.path, p);
        assert!(r.outcome.converged);
    }

    #[test]
    fn gsgd_full_window_single_worker_repeats_full_path_runs() {
        let mut cfg = config(Scheme::Gsgd, 1);
        let p = start(2).unwrap();
        cfg.window_length = Some(p.len());
        let r = gsgd_optimize(&cfg, &model(), &p, 0).unwrap();

        let mut expected = p.clone();
        let mut f = model().eval_full(&p).unwrap();
        let pod = Pod::new(0, p.last_index(), Color::Blue);
        loop {
            let sol = optimize_pod_owned(&model(), expected.clone(), &pod, &cfg.base.inner, StopSignal::none()).unwrap();
            let mut next = expected.clone();
            write_block(&mut next, 0, &sol.block);
            let f_next = model().eval_full(&next).unwrap();
            let done = check_convergence(&expected, &next, f, f_next, &cfg.base);
            expected = next;
            f = f_next;
            if done {
                break;
            }
        }
        assert_eq!(r.path, expected);
        assert!(r.outcome.converged);
    }

    #[test]
    fn gsgd_keeps_endpoints_and_bounds() {
        let p = start(4).unwrap();
        let r = gsgd_optimize(&config(Scheme::Gsgd, 4), &model(), &p, 9).unwrap();
        assert_eq!(r.path.waypoint(0), p.waypoint(0));
        assert_eq!(r.path.waypoint(p.last_index()), p.waypoint(p.last_index()));
        assert!(r.path.waypoints().all(|q| q.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn gsgd_rejects_oversized_window() {
        let mut cfg = config(Scheme::Gsgd, 2);
        cfg.window_length = Some(17);
        assert!(gsgd_optimize(&cfg, &model(), &start(0).unwrap(), 0).is_err());
    }
}
