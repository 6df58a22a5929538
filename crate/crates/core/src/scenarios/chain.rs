//! A generic revolute serial chain and the end-effector terms built on it.

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{InteriorCost, WaypointView};
use crate::path::{Bounds, FullPathVector, Stencil};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainJson", into = "ChainJson")]
pub struct SerialChain {
    axes: Vec<Unit<Vector3<f64>>>,
    link_offsets: Vec<Vector3<f64>>,
    limits: Bounds,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainJson {
    axes: Vec<[f64; 3]>,
    link_offsets: Vec<[f64; 3]>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<ChainJson> for SerialChain {
    type Error = Error;

    fn try_from(j: ChainJson) -> Result<Self> {
        SerialChain::new(j.axes, j.link_offsets, Bounds::new(j.lower, j.upper)?)
    }
}

impl From<SerialChain> for ChainJson {
    fn from(c: SerialChain) -> Self {
        Self {
            axes: c.axes.iter().map(|a| [a.x, a.y, a.z]).collect(),
            link_offsets: c.link_offsets.iter().map(|o| [o.x, o.y, o.z]).collect(),
            lower: c.limits.lower().to_vec(),
            upper: c.limits.upper().to_vec(),
        }
    }
}

impl Default for SerialChain {
    fn default() -> Self {
        Self::generic(7)
    }
}

impl SerialChain {
    /// Axes are normalized; zero axes are rejected.
    pub fn new(axes: Vec<[f64; 3]>, link_offsets: Vec<[f64; 3]>, limits: Bounds) -> Result<Self> {
        let dof = axes.len();
        if dof == 0 {
            return Err(Error::InvalidConfig("chain needs at least one joint".into()));
        }
        if link_offsets.len() != dof {
            return Err(Error::DimensionMismatch {
                expected: dof,
                actual: link_offsets.len(),
            });
        }
        if limits.dim() != dof {
            return Err(Error::DimensionMismatch {
                expected: dof,
                actual: limits.dim(),
            });
        }
        let axes = axes
            .into_iter()
            .map(|a| {
                Unit::try_new(Vector3::from(a), 1e-12)
                    .filter(|u| u.iter().all(|v| v.is_finite()))
                    .ok_or_else(|| Error::InvalidConfig(format!("bad joint axis {a:?}")))
            })
            .collect::<Result<_>>()?;
        let link_offsets: Vec<Vector3<f64>> = link_offsets.into_iter().map(Vector3::from).collect();
        if link_offsets.iter().any(|o| o.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidConfig("link offsets must be finite".into()));
        }
        Ok(Self {
            axes,
            link_offsets,
            limits,
        })
    }

    /// Axes alternating z, y, z, y, ...; every link 0.15 m along the local z
    /// axis; limits of plus or minus pi on every joint.
    pub fn generic(dof: usize) -> Self {
        let axes = (0..dof)
            .map(|i| if i % 2 == 0 { [0.0, 0.0, 1.0] } else { [0.0, 1.0, 0.0] })
            .collect();
        let offsets = vec![[0.0, 0.0, 0.15]; dof];
        let limits = Bounds::uniform(dof, -std::f64::consts::PI, std::f64::consts::PI)
            .expect("symmetric limits are valid");
        Self::new(axes, offsets, limits).expect("generic chain is valid")
    }

    pub fn dof(&self) -> usize {
        self.axes.len()
    }

    pub fn limits(&self) -> &Bounds {
        &self.limits
    }

    /// The chain made of joints `range`, rooted at the frame of its first
    /// joint.
    pub fn sub_chain(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > self.dof() {
            return Err(Error::InvalidRange {
                start: range.start,
                end: range.end,
                len: self.dof(),
            });
        }
        let limits = Bounds::new(
            self.limits.lower()[range.clone()].to_vec(),
            self.limits.upper()[range.clone()].to_vec(),
        )?;
        Ok(Self {
            axes: self.axes[range.clone()].to_vec(),
            link_offsets: self.link_offsets[range].to_vec(),
            limits,
        })
    }

    fn check(&self, joints: &[f64]) -> Result<()> {
        if joints.len() == self.dof() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: joints.len(),
            })
        }
    }

    fn frames(&self, joints: &[f64]) -> impl Iterator<Item = Isometry3<f64>> + '_ {
        let mut pose = Isometry3::identity();
        self.axes
            .iter()
            .zip(&self.link_offsets)
            .zip(joints.to_vec())
            .map(move |((axis, offset), q)| {
                pose *= Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_axis_angle(axis, q),
                );
                pose *= Translation3::from(*offset);
                pose
            })
    }

    /// End-effector pose.
    pub fn pose(&self, joints: &[f64]) -> Result<Isometry3<f64>> {
        self.check(joints)?;
        Ok(self.frames(joints).last().expect("chain has a joint"))
    }

    /// Joint origins followed by the end effector: `dof + 1` points, link `i`
    /// running from point `i` to point `i + 1`.
    pub fn link_points(&self, joints: &[f64]) -> Result<Vec<Point3<f64>>> {
        self.check(joints)?;
        let mut points = Vec::with_capacity(self.dof() + 1);
        points.push(Point3::origin());
        points.extend(self.frames(joints).map(|f| Point3::from(f.translation.vector)));
        Ok(points)
    }
}

pub fn forward_kinematics(
    chain: &SerialChain,
    joints: &[f64],
) -> Result<(Vector3<f64>, UnitQuaternion<f64>)> {
    let pose = chain.pose(joints)?;
    Ok((pose.translation.vector, pose.rotation))
}

/// Geodesic angle between two orientations, in `[0, pi]`.
pub fn rotation_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let dot = a.coords.dot(&b.coords).abs().min(1.0);
    2.0 * dot.acos()
}

pub fn rot_error(chain: &SerialChain, joints: &[f64], goal: &UnitQuaternion<f64>) -> Result<f64> {
    let (_, q) = forward_kinematics(chain, joints)?;
    Ok(rotation_angle(&q, goal))
}

/// Squared hinge `(t - d)^2` summed over pairs of non-adjacent links whose
/// midpoints are closer than `threshold`.
pub fn self_distance_penalty(chain: &SerialChain, joints: &[f64], threshold: f64) -> Result<f64> {
    let points = chain.link_points(joints)?;
    let mids: Vec<Point3<f64>> = points.windows(2).map(|w| nalgebra::center(&w[0], &w[1])).collect();
    let mut total = 0.0;
    for i in 0..mids.len() {
        for j in i + 2..mids.len() {
            let gap = threshold - nalgebra::distance(&mids[i], &mids[j]);
            if gap > 0.0 {
                total += gap * gap;
            }
        }
    }
    Ok(total)
}

/// Central second differences of end-effector positions at waypoints
/// `1..M`.
pub fn ee_second_differences(chain: &SerialChain, path: &FullPathVector) -> Result<Vec<Vector3<f64>>> {
    let positions = path
        .waypoints()
        .map(|q| forward_kinematics(chain, q).map(|(p, _)| p))
        .collect::<Result<Vec<_>>>()?;
    Ok(positions.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect())
}

/// `rot_error(W[i])^2`.
#[derive(Debug, Clone)]
pub struct RotationCost {
    pub chain: SerialChain,
    pub goal: UnitQuaternion<f64>,
}

impl InteriorCost for RotationCost {
    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        let (_, q) = forward_kinematics(&self.chain, at.state()).expect("model checks dimensions");
        rotation_angle(&q, &self.goal).powi(2)
    }
}

/// Squared norm of the second-order stencil applied to end-effector
/// positions.
#[derive(Debug, Clone)]
pub struct EeAccelCost {
    pub chain: SerialChain,
}

impl EeAccelCost {
    fn position(&self, q: &[f64]) -> Vector3<f64> {
        forward_kinematics(&self.chain, q).expect("model checks dimensions").0
    }

    fn apply(stencil: &Stencil, position: impl Fn(usize) -> Vector3<f64>) -> f64 {
        stencil
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| *c * position(stencil.start + k))
            .sum::<Vector3<f64>>()
            .norm_squared()
    }
}

impl InteriorCost for EeAccelCost {
    fn order(&self) -> usize {
        2
    }

    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        let path = at.path();
        Self::apply(&at.stencil(2), |j| self.position(path.waypoint(j)))
    }

    fn cost_range(&self, path: &FullPathVector, a: usize, b: usize) -> f64 {
        // Each position feeds up to three stencils; compute it once.
        let lo = WaypointView::new(path, a).stencil(2).start;
        let hi = WaypointView::new(path, b).stencil(2).indices().end;
        let cache: Vec<Vector3<f64>> = (lo..hi).map(|j| self.position(path.waypoint(j))).collect();
        (a..=b)
            .map(|i| Self::apply(&WaypointView::new(path, i).stencil(2), |j| cache[j - lo]))
            .sum()
    }
}

/// Self-distance penalty at one waypoint.
#[derive(Debug, Clone)]
pub struct SelfDistanceCost {
    pub chain: SerialChain,
    pub threshold: f64,
}

impl InteriorCost for SelfDistanceCost {
    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        self_distance_penalty(&self.chain, at.state(), self.threshold).expect("model checks dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_joints_sum_offsets() {
        let chain = SerialChain::default();
        let (p, q) = forward_kinematics(&chain, &[0.0; 7]).unwrap();
        assert!((p - Vector3::new(0.0, 0.0, 1.05)).norm() < 1e-12);
        assert!(q.angle() < 1e-12);
    }

    #[test]
    fn single_rotation() {
        let chain = SerialChain::new(
            vec![[0.0, 0.0, 1.0]],
            vec![[1.0, 0.0, 0.0]],
            Bounds::uniform(1, -PI, PI).unwrap(),
        )
        .unwrap();
        let (p, _) = forward_kinematics(&chain, &[FRAC_PI_2]).unwrap();
        assert!((p - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn wrong_joint_count() {
        let err = forward_kinematics(&SerialChain::default(), &[0.0; 6]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 7, actual: 6 });
    }

    #[test]
    fn rotation_error_values() {
        let chain = SerialChain::default();
        let id = UnitQuaternion::identity();
        assert_eq!(rot_error(&chain, &[0.0; 7], &id).unwrap(), 0.0);
        let mut joints = [0.0; 7];
        joints[1] = FRAC_PI_2;
        assert!((rot_error(&chain, &joints, &id).unwrap() - FRAC_PI_2).abs() < 1e-9);
        let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1);
        let neg = UnitQuaternion::new_unchecked(-q.into_inner());
        assert!(rotation_angle(&q, &neg) < 1e-6);
    }

    #[test]
    fn extended_chain_has_no_self_distance_cost() {
        // midpoints sit 0.15 apart along z, so non-adjacent ones are >= 0.3 apart
        let chain = SerialChain::default();
        assert_eq!(self_distance_penalty(&chain, &[0.0; 7], 0.08).unwrap(), 0.0);
    }

    #[test]
    fn coincident_midpoints_cost_threshold_squared() {
        // link 0 runs (0,0,0)->(1,0,0); link 1 has zero length; joint 2
        // turns back by pi so link 2 runs (1,0,0)->(0,0,0)
        let chain = SerialChain::new(
            vec![[0.0, 0.0, 1.0]; 3],
            vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            Bounds::uniform(3, -PI, PI).unwrap(),
        )
        .unwrap();
        let t = 0.08;
        let p = self_distance_penalty(&chain, &[0.0, 0.0, PI], t).unwrap();
        assert!((p - t * t).abs() < 1e-12);
    }

    #[test]
    fn ee_accel_range_matches_per_index_sum() {
        let chain = SerialChain::default();
        let path = FullPathVector::new(
            7,
            (0..9).map(|i| (0..7).map(|k| ((i * 7 + k) as f64).sin()).collect()).collect(),
        )
        .unwrap();
        let cost = EeAccelCost { chain };
        for (a, b) in [(0, 8), (0, 0), (8, 8), (3, 5)] {
            let direct: f64 = (a..=b).map(|i| cost.cost(&WaypointView::new(&path, i))).sum();
            assert!((cost.cost_range(&path, a, b) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn chain_json_round_trip() {
        let chain = SerialChain::generic(3);
        let text = serde_json::to_string(&chain).unwrap();
        let back: SerialChain = serde_json::from_str(&text).unwrap();
        assert_eq!(back, chain);
    }
}
