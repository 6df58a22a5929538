//! The discrete path objective and its restriction to a waypoint range.
//!
//! `f(X) = g(W[0], W[M]) + sum_i h(W[i], W'[i], W''[i], W'''[i])`, where `g`
//! collects the boundary terms and `h` the weighted interior terms.
//! Constraints are softened into penalties: equality constraints contribute
//! `weight * c^2` and inequality constraints (`c < 0` feasible) contribute
//! `weight * max(0, c)^2`.
//!
//! The restriction to `[a, b]` keeps only the interior terms whose index
//! lies in the range, plus the boundary terms when the range touches either
//! end of the path. Waypoints outside the range are still read by the
//! derivative stencils but are treated as constants.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::optimize::Problem;
use crate::path::{required_buffer, Bounds, FullPathVector, StateVec, Stencil};

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Read access to one waypoint and its stencil neighborhood.
#[derive(Clone, Copy)]
pub struct WaypointView<'a> {
    path: &'a FullPathVector,
    index: usize,
}

impl<'a> WaypointView<'a> {
    pub fn new(path: &'a FullPathVector, index: usize) -> Self {
        Self { path, index }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn state(&self) -> &'a [f64] {
        self.path.waypoint(self.index)
    }

    pub fn path(&self) -> &'a FullPathVector {
        self.path
    }

    /// Stencil for a derivative of `order` at this waypoint.
    ///
    /// Panics if the path is too short for `order`; models check path length
    /// against the highest declared order before evaluating any term.
    pub fn stencil(&self, order: usize) -> Stencil {
        Stencil::new(order, self.index, self.path.len())
            .expect("path length is validated against the term order")
    }

    pub fn derivative(&self, order: usize) -> StateVec {
        let path = self.path;
        self.stencil(order).apply(path.dim(), |j| path.waypoint(j))
    }
}

/// A per-waypoint cost `h`.
pub trait InteriorCost: Send + Sync {
    /// Highest derivative order read through [`WaypointView`]; 0 if the cost
    /// only looks at the waypoint itself.
    fn order(&self) -> usize {
        0
    }

    fn cost(&self, at: &WaypointView<'_>) -> f64;

    /// Sum of `cost` over indices `a..=b`, in index order. Costs that share
    /// work between neighboring waypoints can override this.
    fn cost_range(&self, path: &FullPathVector, a: usize, b: usize) -> f64 {
        (a..=b).map(|i| self.cost(&WaypointView::new(path, i))).sum()
    }
}

/// A cost `g` on the two endpoints of the path.
pub trait BoundaryCost: Send + Sync {
    fn cost(&self, first: &[f64], last: &[f64]) -> f64;
}

/// Squared norm of the derivative of a fixed order.
#[derive(Debug, Clone, Copy)]
pub struct Smoothness {
    order: usize,
}

impl Smoothness {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(Self { order })
    }
}

impl InteriorCost for Smoothness {
    fn order(&self) -> usize {
        self.order
    }

    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        at.derivative(self.order).iter().map(|v| v * v).sum()
    }
}

/// `||W[i] - target||^2`.
#[derive(Debug, Clone)]
pub struct PullToTarget {
    pub target: Vec<f64>,
}

impl InteriorCost for PullToTarget {
    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        at.state()
            .iter()
            .zip(&self.target)
            .map(|(q, c)| (q - c).powi(2))
            .sum()
    }
}

type InteriorFnBox = dyn Fn(&WaypointView<'_>) -> f64 + Send + Sync;

/// Adapter turning a closure into an [`InteriorCost`].
pub struct InteriorFn {
    order: usize,
    f: Box<InteriorFnBox>,
}

impl InteriorFn {
    pub fn new(order: usize, f: impl Fn(&WaypointView<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Self { order, f: Box::new(f) }
    }
}

impl InteriorCost for InteriorFn {
    fn order(&self) -> usize {
        self.order
    }

    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        (self.f)(at)
    }
}

/// Adapter turning a closure into a [`BoundaryCost`].
pub struct BoundaryFn<F>(pub F);

impl<F> BoundaryCost for BoundaryFn<F>
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn cost(&self, first: &[f64], last: &[f64]) -> f64 {
        (self.0)(first, last)
    }
}

#[derive(Clone)]
pub enum TermKind {
    Boundary(Arc<dyn BoundaryCost>),
    Interior(Arc<dyn InteriorCost>),
}

impl TermKind {
    fn order(&self) -> usize {
        match self {
            TermKind::Boundary(_) => 0,
            TermKind::Interior(h) => h.order(),
        }
    }
}

#[derive(Clone)]
pub struct Term {
    pub name: String,
    pub weight: f64,
    pub kind: TermKind,
}

impl Term {
    pub fn interior(name: impl Into<String>, weight: f64, cost: impl InteriorCost + 'static) -> Self {
        Self {
            name: name.into(),
            weight,
            kind: TermKind::Interior(Arc::new(cost)),
        }
    }

    pub fn boundary(name: impl Into<String>, weight: f64, cost: impl BoundaryCost + 'static) -> Self {
        Self {
            name: name.into(),
            weight,
            kind: TermKind::Boundary(Arc::new(cost)),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TermKind::Boundary(_) => "boundary",
            TermKind::Interior(_) => "interior",
        };
        f.debug_struct("Term")
            .field("name", &self.name)
            .field("weight", &self.weight)
            .field("kind", &kind)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    /// `c = 0` feasible; cost `c^2`.
    Equality,
    /// `c < 0` feasible; cost `max(0, c)^2`.
    Inequality,
}

impl PenaltyKind {
    fn apply(self, c: f64) -> f64 {
        match self {
            PenaltyKind::Equality => c * c,
            PenaltyKind::Inequality => c.max(0.0).powi(2),
        }
    }
}

/// A constraint softened into a weighted penalty.
#[derive(Clone)]
pub struct Penalty {
    pub name: String,
    pub weight: f64,
    pub kind: PenaltyKind,
    pub constraint: TermKind,
}

impl Penalty {
    pub fn interior(
        name: impl Into<String>,
        weight: f64,
        kind: PenaltyKind,
        constraint: impl InteriorCost + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            weight,
            kind,
            constraint: TermKind::Interior(Arc::new(constraint)),
        }
    }

    pub fn boundary(
        name: impl Into<String>,
        weight: f64,
        kind: PenaltyKind,
        constraint: impl BoundaryCost + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            weight,
            kind,
            constraint: TermKind::Boundary(Arc::new(constraint)),
        }
    }
}

impl fmt::Debug for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Penalty")
            .field("name", &self.name)
            .field("weight", &self.weight)
            .field("kind", &self.kind)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    dim: usize,
    terms: Vec<Term>,
    penalties: Vec<Penalty>,
    bounds: Option<Bounds>,
    fd_step: f64,
}

impl ObjectiveModel {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
            penalties: Vec::new(),
            bounds: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_term(mut self, term: Term) -> Self {
        self.terms.push(term);
        self
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalties.push(penalty);
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Result<Self> {
        if bounds.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: bounds.dim(),
            });
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_fd_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidConfig(format!("finite-difference step {step}")));
        }
        self.fd_step = step;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn penalties(&self) -> &[Penalty] {
        &self.penalties
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn max_order(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.kind.order())
            .chain(self.penalties.iter().map(|p| p.constraint.order()))
            .max()
            .unwrap_or(0)
    }

    /// Smallest buffer length `ell` that keeps every term local: evaluating
    /// the restriction to `[a, b]` reads no waypoint outside
    /// `[a - ell, b + ell]` when the range has at least `ell` waypoints.
    pub fn stencil_radius(&self) -> usize {
        required_buffer(self.max_order())
    }

    pub fn check_path(&self, path: &FullPathVector) -> Result<()> {
        if path.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: path.dim(),
            });
        }
        let order = self.max_order();
        if order > 0 && path.len() < order + 1 {
            return Err(Error::PathTooShort {
                len: path.len(),
                order,
            });
        }
        Ok(())
    }

    fn check_range(&self, path: &FullPathVector, a: usize, b: usize) -> Result<()> {
        self.check_path(path)?;
        if a > b || b >= path.len() {
            return Err(Error::InvalidRange {
                start: a,
                end: b,
                len: path.len(),
            });
        }
        Ok(())
    }

    pub fn eval_full(&self, path: &FullPathVector) -> Result<f64> {
        self.eval_restricted(path, 0, path.last_index())
    }

    pub fn eval_restricted(&self, path: &FullPathVector, a: usize, b: usize) -> Result<f64> {
        self.check_range(path, a, b)?;
        Ok(self.eval_unchecked(path, a, b))
    }

    /// Boundary terms and boundary penalties only.
    pub fn eval_boundary(&self, path: &FullPathVector) -> Result<f64> {
        self.check_path(path)?;
        let (first, last) = (path.waypoint(0), path.waypoint(path.last_index()));
        let terms: f64 = self
            .terms
            .iter()
            .filter_map(|t| match &t.kind {
                TermKind::Boundary(g) => Some(t.weight * g.cost(first, last)),
                TermKind::Interior(_) => None,
            })
            .sum();
        let penalties: f64 = self
            .penalties
            .iter()
            .filter_map(|p| match &p.constraint {
                TermKind::Boundary(g) => Some(p.weight * p.kind.apply(g.cost(first, last))),
                TermKind::Interior(_) => None,
            })
            .sum();
        Ok(terms + penalties)
    }

    pub(crate) fn eval_unchecked(&self, path: &FullPathVector, a: usize, b: usize) -> f64 {
        let with_boundary = a == 0 || b == path.last_index();
        let (first, last) = (path.waypoint(0), path.waypoint(path.last_index()));
        let mut total = 0.0;
        for term in &self.terms {
            match &term.kind {
                TermKind::Boundary(g) if with_boundary => total += term.weight * g.cost(first, last),
                TermKind::Boundary(_) => {}
                TermKind::Interior(h) => total += term.weight * h.cost_range(path, a, b),
            }
        }
        for penalty in &self.penalties {
            match &penalty.constraint {
                TermKind::Boundary(g) if with_boundary => {
                    total += penalty.weight * penalty.kind.apply(g.cost(first, last))
                }
                TermKind::Boundary(_) => {}
                TermKind::Interior(h) => {
                    let sum: f64 = (a..=b)
                        .map(|i| penalty.kind.apply(h.cost(&WaypointView::new(path, i))))
                        .sum();
                    total += penalty.weight * sum;
                }
            }
        }
        total
    }

    /// Central finite-difference gradient of the restriction to `[a, b]` with
    /// respect to the waypoints in that range, laid out waypoint-major.
    /// Components of frozen waypoints are exactly zero.
    pub fn grad_restricted(&self, path: &FullPathVector, a: usize, b: usize) -> Result<Vec<f64>> {
        self.check_range(path, a, b)?;
        let mut problem = RestrictedProblem::new(self, path.clone(), a, b)?;
        let x = problem.initial_values();
        let mut free_grad = vec![0.0; x.len()];
        problem.fd_gradient(&x, &mut free_grad);

        let n = self.dim;
        let mut grad = vec![0.0; (b - a + 1) * n];
        for (slot, g) in problem.free().iter().zip(free_grad) {
            grad[slot - a * n] = g;
        }
        Ok(grad)
    }

    /// Clamps every unfrozen waypoint into the model's box.
    pub fn apply_bounds(&self, path: &FullPathVector) -> FullPathVector {
        let mut out = path.clone();
        if let Some(bounds) = &self.bounds {
            let n = out.dim();
            for i in 0..out.len() {
                if !out.is_frozen(i) {
                    bounds.clamp(&mut out.flat_mut()[i * n..(i + 1) * n]);
                }
            }
        }
        out
    }
}

/// The restricted objective as a function of the unfrozen components of
/// waypoints `a..=b`, evaluated against a private copy of the path.
pub struct RestrictedProblem<'m> {
    model: &'m ObjectiveModel,
    scratch: FullPathVector,
    a: usize,
    b: usize,
    free: Vec<usize>,
}

impl<'m> RestrictedProblem<'m> {
    pub fn new(model: &'m ObjectiveModel, path: FullPathVector, a: usize, b: usize) -> Result<Self> {
        model.check_range(&path, a, b)?;
        let n = path.dim();
        let free = (a..=b)
            .filter(|i| !path.is_frozen(*i))
            .flat_map(|i| i * n..(i + 1) * n)
            .collect();
        Ok(Self {
            model,
            scratch: path,
            a,
            b,
            free,
        })
    }

    /// Flat path indices of the decision variables.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn initial_values(&self) -> Vec<f64> {
        let flat = self.scratch.as_flat();
        self.free.iter().map(|k| flat[*k]).collect()
    }

    /// The model's box restricted to the decision variables.
    pub fn bounds(&self) -> Option<Bounds> {
        let bounds = self.model.bounds()?;
        if self.free.is_empty() {
            return None;
        }
        let n = self.model.dim();
        let lower = self.free.iter().map(|k| bounds.lower()[k % n]).collect();
        let upper = self.free.iter().map(|k| bounds.upper()[k % n]).collect();
        Some(Bounds::new(lower, upper).expect("sub-box of a valid box"))
    }

    pub fn load(&mut self, x: &[f64]) {
        let flat = self.scratch.flat_mut();
        for (k, v) in self.free.iter().zip(x) {
            flat[*k] = *v;
        }
    }

    pub fn path(&self) -> &FullPathVector {
        &self.scratch
    }

    pub fn into_path(self) -> FullPathVector {
        self.scratch
    }

    fn fd_gradient(&mut self, x: &[f64], out: &mut [f64]) {
        self.load(x);
        let h = self.model.fd_step();
        for (slot, k) in self.free.clone().into_iter().enumerate() {
            let orig = self.scratch.as_flat()[k];
            let up = orig + h;
            let down = orig - h;
            self.scratch.flat_mut()[k] = up;
            let f_up = self.model.eval_unchecked(&self.scratch, self.a, self.b);
            self.scratch.flat_mut()[k] = down;
            let f_down = self.model.eval_unchecked(&self.scratch, self.a, self.b);
            self.scratch.flat_mut()[k] = orig;
            out[slot] = (f_up - f_down) / (up - down);
        }
    }
}

impl Problem for RestrictedProblem<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.load(x);
        self.model.eval_unchecked(&self.scratch, self.a, self.b)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&mut self, x: &[f64], out: &mut [f64]) {
        self.fd_gradient(x, out);
    }
}
