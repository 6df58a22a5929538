//! Waypoint paths: storage, index-space finite differences, linear-spline
//! sampling and seeded initial conditions.
//!
//! A path of `M + 1` waypoints in an `n`-dimensional configuration space is
//! stored as one flat vector of length `(M + 1) * n`. Derivatives are taken in
//! index space with unit spacing between consecutive waypoints.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Small inline vector used for per-waypoint quantities.
pub type StateVec = SmallVec<[f64; 8]>;

/// Axis-aligned box, applied per waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidBounds("zero-dimensional box".into()));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidBounds(format!(
                    "component {k}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` on every one of `n` components.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim()
            && q
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, (lo, hi)) in q.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Longest straight segment that fits in the box.
    pub fn diagonal(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// The full path vector: all waypoint states concatenated, plus the set of
/// waypoint indices that optimizers must leave untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathJson", into = "PathJson")]
pub struct FullPathVector {
    n: usize,
    data: Vec<f64>,
    frozen: BTreeSet<usize>,
}

/// Canonical on-disk layout.
#[derive(Serialize, Deserialize)]
struct PathJson {
    n: usize,
    waypoints: Vec<Vec<f64>>,
    frozen: Vec<usize>,
}

impl TryFrom<PathJson> for FullPathVector {
    type Error = Error;

    fn try_from(raw: PathJson) -> Result<Self> {
        let mut path = FullPathVector::new(raw.n, raw.waypoints)?;
        for i in raw.frozen {
            path.freeze(i)?;
        }
        Ok(path)
    }
}

impl From<FullPathVector> for PathJson {
    fn from(path: FullPathVector) -> Self {
        PathJson {
            n: path.n,
            waypoints: path.waypoints().map(<[f64]>::to_vec).collect(),
            frozen: path.frozen.into_iter().collect(),
        }
    }
}

impl FullPathVector {
    pub fn new(n: usize, waypoints: Vec<Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(waypoints.len() * n);
        for w in &waypoints {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: w.len(),
                });
            }
            data.extend_from_slice(w);
        }
        Self::from_flat(n, data)
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPath("state dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(n) {
            return Err(Error::InvalidPath(format!(
                "flat length {} is not a multiple of n = {n}",
                data.len()
            )));
        }
        if data.len() / n < 2 {
            return Err(Error::InvalidPath("a path needs at least two waypoints".into()));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPath(format!(
                "non-finite component at waypoint {}",
                bad / n
            )));
        }
        Ok(Self {
            n,
            data,
            frozen: BTreeSet::new(),
        })
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of waypoints, `M + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    /// Always false: a valid path holds at least two waypoints.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the final waypoint, `M`.
    pub fn last_index(&self) -> usize {
        self.len() - 1
    }

    pub fn waypoint(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn waypoints(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Overwrite waypoint `i`. Frozen waypoints are writable here; the
    /// optimizers are the ones that respect the mask.
    pub fn set_waypoint(&mut self, i: usize, q: &[f64]) -> Result<()> {
        self.check_index(i)?;
        if q.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: q.len(),
            });
        }
        self.data[i * self.n..(i + 1) * self.n].copy_from_slice(q);
        Ok(())
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn freeze(&mut self, i: usize) -> Result<()> {
        self.check_index(i)?;
        self.frozen.insert(i);
        Ok(())
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen.contains(&i)
    }

    pub fn frozen(&self) -> &BTreeSet<usize> {
        &self.frozen
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            })
        }
    }

    /// Largest per-waypoint infinity-norm displacement between two paths.
    pub fn max_displacement(&self, other: &FullPathVector) -> Result<f64> {
        if self.n != other.n || self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("path serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// A finite-difference stencil: coefficients applied to consecutive waypoint
/// indices beginning at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub coeffs: &'static [f64],
}

const FIRST_CENTRAL: [f64; 3] = [-0.5, 0.0, 0.5];
const FIRST_ONE_SIDED: [f64; 2] = [-1.0, 1.0];
const SECOND: [f64; 3] = [1.0, -2.0, 1.0];
const THIRD_CENTRAL: [f64; 5] = [-0.5, 1.0, 0.0, -1.0, 0.5];
const THIRD_ONE_SIDED: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];

impl Stencil {
    /// Stencil for a derivative of `order` at index `i` of a path with `len`
    /// waypoints. Central where it fits, otherwise the same-order one-sided
    /// stencil shifted inward.
    pub fn new(order: usize, i: usize, len: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if len < order + 1 {
            return Err(Error::PathTooShort { len, order });
        }
        let last = len - 1;
        let stencil = match order {
            1 if i == 0 => Stencil { start: 0, coeffs: &FIRST_ONE_SIDED },
            1 if i == last => Stencil { start: last - 1, coeffs: &FIRST_ONE_SIDED },
            1 => Stencil { start: i - 1, coeffs: &FIRST_CENTRAL },
            2 => Stencil { start: i.saturating_sub(1).min(len - 3), coeffs: &SECOND },
            _ if i >= 2 && i + 2 <= last => Stencil { start: i - 2, coeffs: &THIRD_CENTRAL },
            _ if i < 2 => Stencil { start: 0, coeffs: &THIRD_ONE_SIDED },
            _ => Stencil { start: len - 4, coeffs: &THIRD_ONE_SIDED },
        };
        Ok(stencil)
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.coeffs.len()
    }

    /// Applies the stencil to `n`-vectors produced by `value(j)`.
    pub fn apply<'v>(&self, n: usize, value: impl Fn(usize) -> &'v [f64]) -> StateVec {
        let mut out: StateVec = SmallVec::from_elem(0.0, n);
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(value(self.start + k)) {
                *o += c * v;
            }
        }
        out
    }
}

/// Smallest pod length / buffer `ell` for which a term built on a derivative
/// of `order` never reads into a same-color pod. Central stencils reach
/// `ceil(order / 2)` indices; the shifted boundary stencils additionally need
/// `2 * ell - 1 >= order`.
pub fn required_buffer(order: usize) -> usize {
    match order {
        0 => 0,
        1 => 1,
        _ => 2,
    }
}

/// Finite-difference derivative of `order` at waypoint `i`, in index space.
pub fn derivative(path: &FullPathVector, order: usize, i: usize) -> Result<StateVec> {
    let stencil = Stencil::new(order, i, path.len())?;
    Ok(stencil.apply(path.dim(), |j| path.waypoint(j)))
}

/// Piecewise-linear interpolation through the waypoints at parameter `u`.
pub fn sample_spline(path: &FullPathVector, u: f64) -> Result<StateVec> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::ParameterOutOfRange(u));
    }
    let m = path.last_index();
    let s = u * m as f64;
    let j = s.floor() as usize;
    if j >= m {
        return Ok(SmallVec::from_slice(path.waypoint(m)));
    }
    let t = s - j as f64;
    let (a, b) = (path.waypoint(j), path.waypoint(j + 1));
    Ok(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect())
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Straight line between two random points `distance` apart inside `bounds`,
/// sampled with `segments + 1` evenly spaced waypoints and perturbed by
/// uniform noise in `[-noise, noise]` per component. Noised waypoints are
/// clamped into the box, then the two endpoints are frozen.
pub fn generate_initial_path(
    bounds: &Bounds,
    distance: f64,
    segments: usize,
    noise: f64,
    seed: u64,
) -> Result<FullPathVector> {
    if segments == 0 {
        return Err(Error::InvalidPath("need at least one segment".into()));
    }
    if !(distance >= 0.0 && distance.is_finite()) || !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidPath(format!(
            "distance {distance} and noise {noise} must be finite and non-negative"
        )));
    }
    let n = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut endpoints = None;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let a: Vec<f64> = (0..n)
            .map(|k| sample_interval(&mut rng, bounds.lower()[k], bounds.upper()[k]))
            .collect();
        let dir = random_direction(&mut rng, n);
        let b: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + distance * d).collect();
        if bounds.contains(&b) {
            endpoints = Some((a, b));
            break;
        }
    }
    let (a, b) = endpoints.ok_or(Error::RetryBudgetExceeded {
        distance,
        attempts: PLACEMENT_ATTEMPTS,
    })?;

    let mut data = Vec::with_capacity((segments + 1) * n);
    for i in 0..=segments {
        let t = i as f64 / segments as f64;
        let start = data.len();
        for k in 0..n {
            let jitter = if noise > 0.0 {
                rng.random_range(-noise..=noise)
            } else {
                0.0
            };
            data.push((1.0 - t) * a[k] + t * b[k] + jitter);
        }
        bounds.clamp(&mut data[start..]);
    }
    let mut path = FullPathVector::from_flat(n, data)?;
    path.freeze(0)?;
    path.freeze(segments)?;
    Ok(path)
}

fn sample_interval(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn random_direction(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> FullPathVector {
        FullPathVector::new(1, values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    #[test]
    fn first_derivative_of_linear_data() {
        let p = line(&[0.0, 1.0, 2.0]);
        assert_eq!(derivative(&p, 1, 1).unwrap()[0], 1.0);
        assert_eq!(derivative(&p, 1, 0).unwrap()[0], 1.0);
        assert_eq!(derivative(&p, 1, 2).unwrap()[0], 1.0);
    }

    #[test]
    fn second_difference() {
        let p = line(&[0.0, 1.0, 4.0]);
        assert_eq!(derivative(&p, 2, 1).unwrap()[0], 2.0);
        // shifted boundary stencils see the same three points
        assert_eq!(derivative(&p, 2, 0).unwrap()[0], 2.0);
        assert_eq!(derivative(&p, 2, 2).unwrap()[0], 2.0);
    }

    #[test]
    fn third_derivative_of_linear_2d_data_vanishes() {
        let p = FullPathVector::new(
            2,
            (0..5).map(|k| vec![k as f64, 2.0 * k as f64]).collect(),
        )
        .unwrap();
        for i in 0..5 {
            let d = derivative(&p, 3, i).unwrap();
            assert_eq!(d.as_slice(), &[0.0, 0.0], "index {i}");
        }
    }

    #[test]
    fn third_derivative_of_cubic() {
        // t^3 has third derivative 6 everywhere; both stencil shapes are exact
        let p = line(&(0..7).map(|t| (t as f64).powi(3)).collect::<Vec<_>>());
        for i in 0..7 {
            assert!((derivative(&p, 3, i).unwrap()[0] - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stencils_stay_within_order_radius() {
        for len in 4..12 {
            for order in 1..=3 {
                for i in 0..len {
                    let s = Stencil::new(order, i, len).unwrap();
                    let r = s.indices();
                    assert!(r.start + order >= i && r.end - 1 <= i + order);
                    assert!(r.end <= len);
                }
            }
        }
    }

    #[test]
    fn derivative_errors() {
        let p = line(&[0.0, 1.0, 2.0]);
        assert_eq!(derivative(&p, 4, 0), Err(Error::UnsupportedOrder(4)));
        assert_eq!(
            derivative(&p, 1, 3),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        );
        assert_eq!(
            derivative(&p, 3, 0),
            Err(Error::PathTooShort { len: 3, order: 3 })
        );
    }

    #[test]
    fn spline_samples() {
        let p = FullPathVector::new(2, vec![vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(sample_spline(&p, 0.5).unwrap().as_slice(), &[1.0, 1.0]);
        assert_eq!(sample_spline(&p, 0.0).unwrap().as_slice(), p.waypoint(0));
        assert_eq!(sample_spline(&p, 1.0).unwrap().as_slice(), p.waypoint(1));

        let q = line(&[0.0, 1.0, 3.0]);
        assert_eq!(sample_spline(&q, 0.75).unwrap()[0], 2.0);
        assert!(matches!(
            sample_spline(&q, 1.5),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(sample_spline(&q, -0.1).is_err());
    }

    #[test]
    fn unperturbed_initial_path_has_exact_midpoint() {
        let b = Bounds::uniform(3, -1.0, 1.0).unwrap();
        let p = generate_initial_path(&b, 0.5, 2, 0.0, 7).unwrap();
        let (a, z) = (p.waypoint(0), p.waypoint(2));
        for k in 0..3 {
            assert_eq!(p.waypoint(1)[k], 0.5 * (a[k] + z[k]));
        }
        let dist: f64 = a.iter().zip(z).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 0.5).abs() < 1e-12);
    }

    #[test]
    fn initial_path_is_seeded() {
        let b = Bounds::uniform(2, 0.0, 1.0).unwrap();
        let p1 = generate_initial_path(&b, 0.6, 20, 0.01, 3).unwrap();
        let p2 = generate_initial_path(&b, 0.6, 20, 0.01, 3).unwrap();
        assert_eq!(p1.to_json(), p2.to_json());
        let p3 = generate_initial_path(&b, 0.6, 20, 0.01, 4).unwrap();
        assert_ne!(p1, p3);
        assert_eq!(p1.frozen().iter().copied().collect::<Vec<_>>(), vec![0, 20]);
        assert!(p1.waypoints().all(|w| b.contains(w)));
    }

    #[test]
    fn impossible_distance_exhausts_retries() {
        let b = Bounds::uniform(2, 0.0, 1.0).unwrap();
        let err = generate_initial_path(&b, 2.0, 4, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::RetryBudgetExceeded { .. }));
    }

    #[test]
    fn json_layout() {
        let mut p = FullPathVector::new(2, vec![vec![0.0, 1.0], vec![2.0, 3.5]]).unwrap();
        p.freeze(1).unwrap();
        assert_eq!(
            p.to_json(),
            r#"{"n":2,"waypoints":[[0.0,1.0],[2.0,3.5]],"frozen":[1]}"#
        );
        assert_eq!(FullPathVector::from_json(&p.to_json()).unwrap(), p);
        assert!(FullPathVector::from_json(r#"{"n":2,"waypoints":[[0.0]],"frozen":[]}"#).is_err());
    }

    #[test]
    fn rejects_degenerate_paths() {
        assert!(FullPathVector::new(1, vec![vec![0.0]]).is_err());
        assert!(FullPathVector::new(0, vec![vec![], vec![]]).is_err());
        assert!(FullPathVector::new(1, vec![vec![0.0], vec![f64::NAN]]).is_err());
    }
}
