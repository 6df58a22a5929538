//! The benchmark scenarios: a 2-D path through a field of costly circles and
//! two end-effector tasks on a 7-joint chain.

mod chain;
mod field;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ObjectiveModel, Smoothness, Term};
use crate::path::{generate_initial_path, FullPathVector};

pub use chain::{
    ee_second_differences, forward_kinematics, rot_error, rotation_angle, self_distance_penalty,
    EeAccelCost, RotationCost, SelfDistanceCost, SerialChain,
};
pub use field::{circle_cost, CircleGridField, ImageCost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScenarioKind {
    CircleGrid,
    UprightEe,
    StraightEe,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::CircleGrid, Self::UprightEe, Self::StraightEe];

    pub fn name(self) -> &'static str {
        match self {
            Self::CircleGrid => "circle-grid",
            Self::UprightEe => "upright-ee",
            Self::StraightEe => "straight-ee",
        }
    }

    /// Initial-condition distance and noise used when a spec leaves them out.
    pub fn default_initial_conditions(self) -> (f64, f64) {
        match self {
            Self::CircleGrid => (0.7, 0.02),
            Self::UprightEe | Self::StraightEe => (2.0, 0.05),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "scenario",
                name: s.to_owned(),
            })
    }
}

impl TryFrom<String> for ScenarioKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScenarioKind> for String {
    fn from(k: ScenarioKind) -> Self {
        k.name().to_owned()
    }
}

/// Term weights. Terms with weight 0 are left out of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub image: f64,
    pub rotation: f64,
    pub ee_accel: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub self_distance: f64,
    /// Link midpoints closer than this (meters) are penalized.
    pub self_distance_threshold: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            image: 1.0,
            rotation: 1.0,
            ee_accel: 1.0,
            velocity: 0.05,
            acceleration: 0.05,
            jerk: 0.01,
            self_distance: 1.0,
            self_distance_threshold: 0.08,
        }
    }
}

impl Weights {
    fn validate(&self) -> Result<()> {
        let all = [
            self.image,
            self.rotation,
            self.ee_accel,
            self.velocity,
            self.acceleration,
            self.jerk,
            self.self_distance,
            self.self_distance_threshold,
        ];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("weights must be finite and non-negative: {self:?}")))
        }
    }

    pub fn without_smoothness(mut self) -> Self {
        self.velocity = 0.0;
        self.acceleration = 0.0;
        self.jerk = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    /// Number of waypoints, `M + 1`.
    pub waypoints: usize,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub distance: Option<f64>,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub field: CircleGridField,
    #[serde(default)]
    pub chain: SerialChain,
    /// End-effector goal orientation as `[w, x, y, z]`.
    #[serde(default = "identity_goal")]
    pub goal: [f64; 4],
}

fn identity_goal() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl ScenarioSpec {
    pub fn new(name: ScenarioKind, waypoints: usize, seed: u64) -> Self {
        Self {
            name,
            waypoints,
            weights: Weights::default(),
            distance: None,
            noise: None,
            seed,
            field: CircleGridField::default(),
            chain: SerialChain::default(),
            goal: identity_goal(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        match self.name {
            ScenarioKind::CircleGrid => 2,
            _ => self.chain.dof(),
        }
    }

    pub fn goal_orientation(&self) -> Result<UnitQuaternion<f64>> {
        let [w, x, y, z] = self.goal;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::InvalidConfig(format!("goal {:?} is not a rotation", self.goal)));
        }
        Ok(UnitQuaternion::from_quaternion(q))
    }

    pub fn initial_conditions(&self) -> (f64, f64) {
        let (d, n) = self.name.default_initial_conditions();
        (self.distance.unwrap_or(d), self.noise.unwrap_or(n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints < 2 {
            return Err(Error::InvalidConfig(format!(
                "a scenario needs at least 2 waypoints, got {}",
                self.waypoints
            )));
        }
        self.weights.validate()?;
        match self.name {
            ScenarioKind::CircleGrid => self.field.validate(),
            _ => self.goal_orientation().map(|_| ()),
        }
    }
}

/// A scenario ready to optimize.
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: ObjectiveModel,
    pub initial: FullPathVector,
}

fn smoothness_terms(mut model: ObjectiveModel, w: &Weights) -> ObjectiveModel {
    for (name, weight, order) in [
        ("velocity", w.velocity, 1),
        ("acceleration", w.acceleration, 2),
        ("jerk", w.jerk, 3),
    ] {
        if weight > 0.0 {
            let cost = Smoothness::new(order).expect("orders 1..=3 are supported");
            model = model.with_term(Term::interior(name, weight, cost));
        }
    }
    model
}

pub fn build_model(spec: &ScenarioSpec) -> Result<ObjectiveModel> {
    spec.validate()?;
    let w = &spec.weights;
    let model = match spec.name {
        ScenarioKind::CircleGrid => {
            let mut m = ObjectiveModel::new(2);
            if w.image > 0.0 {
                m = m.with_term(Term::interior("image", w.image, ImageCost(spec.field.clone())));
            }
            smoothness_terms(m, w).with_bounds(CircleGridField::domain())?
        }
        kind => {
            let chain = spec.chain.clone();
            let mut m = ObjectiveModel::new(chain.dof());
            if kind == ScenarioKind::UprightEe && w.rotation > 0.0 {
                let goal = spec.goal_orientation()?;
                m = m.with_term(Term::interior("rotation", w.rotation, RotationCost { chain: chain.clone(), goal }));
            }
            if kind == ScenarioKind::StraightEe && w.ee_accel > 0.0 {
                m = m.with_term(Term::interior("ee_accel", w.ee_accel, EeAccelCost { chain: chain.clone() }));
            }
            m = smoothness_terms(m, w);
            if w.self_distance > 0.0 {
                let cost = SelfDistanceCost {
                    chain: chain.clone(),
                    threshold: w.self_distance_threshold,
                };
                m = m.with_term(Term::interior("self_distance", w.self_distance, cost));
            }
            m.with_bounds(chain.limits().clone())?
        }
    };
    Ok(model)
}

/// The seeded straight-line-plus-noise start for `spec`.
pub fn initial_path(spec: &ScenarioSpec) -> Result<FullPathVector> {
    spec.validate()?;
    let bounds = match spec.name {
        ScenarioKind::CircleGrid => CircleGridField::domain(),
        _ => spec.chain.limits().clone(),
    };
    let (distance, noise) = spec.initial_conditions();
    generate_initial_path(&bounds, distance, spec.waypoints - 1, noise, spec.seed)
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    Ok(Scenario {
        spec: spec.clone(),
        model: build_model(spec)?,
        initial: initial_path(spec)?,
    })
}

pub fn quality_metric(spec: &ScenarioSpec, path: &FullPathVector) -> Result<f64> {
    if path.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: path.dim(),
        });
    }
    let mean = |values: Vec<f64>| values.iter().sum::<f64>() / values.len().max(1) as f64;
    match spec.name {
        ScenarioKind::CircleGrid => Ok(mean(path.waypoints().map(|q| circle_cost(&spec.field, q)).collect())),
        ScenarioKind::UprightEe => {
            let goal = spec.goal_orientation()?;
            let errors = path
                .waypoints()
                .map(|q| rot_error(&spec.chain, q, &goal))
                .collect::<Result<Vec<_>>>()?;
            Ok(mean(errors))
        }
        ScenarioKind::StraightEe => {
            let diffs = ee_second_differences(&spec.chain, path)?;
            Ok(mean(diffs.iter().map(|d| d.norm()).collect()))
        }
    }
}
