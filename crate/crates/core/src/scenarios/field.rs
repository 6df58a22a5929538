use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{InteriorCost, WaypointView};
use crate::path::Bounds;

/// Analytic stand-in for a grayscale cost image on the unit square: cost 1
/// inside any disc of `radius` around a center, 0 beyond `falloff`, and a
/// smoothstep ramp in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleGridField {
    pub centers: Vec<[f64; 2]>,
    pub radius: f64,
    pub falloff: f64,
}

impl Default for CircleGridField {
    /// A 5x5 lattice with spacing 0.2 starting at (0.1, 0.1).
    fn default() -> Self {
        let centers = (0..5)
            .flat_map(|i| (0..5).map(move |j| [0.1 + 0.2 * i as f64, 0.1 + 0.2 * j as f64]))
            .collect();
        Self {
            centers,
            radius: 0.05,
            falloff: 0.09,
        }
    }
}

impl CircleGridField {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.falloff > self.radius && self.falloff.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < radius ({}) < falloff ({})",
                self.radius, self.falloff
            )));
        }
        if self.centers.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("circle centers must be finite".into()));
        }
        Ok(())
    }

    /// The unit square.
    pub fn domain() -> Bounds {
        Bounds::uniform(2, 0.0, 1.0).expect("unit box is valid")
    }

    pub fn nearest_distance(&self, q: &[f64]) -> f64 {
        self.centers
            .iter()
            .map(|c| (q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

pub fn circle_cost(field: &CircleGridField, q: &[f64]) -> f64 {
    let d = field.nearest_distance(q);
    if d <= field.radius {
        1.0
    } else if d >= field.falloff {
        0.0
    } else {
        let s = (field.falloff - d) / (field.falloff - field.radius);
        s * s * (3.0 - 2.0 * s)
    }
}

/// Interior term `circle_cost(W[i])`.
#[derive(Debug, Clone)]
pub struct ImageCost(pub CircleGridField);

impl InteriorCost for ImageCost {
    fn cost(&self, at: &WaypointView<'_>) -> f64 {
        circle_cost(&self.0, at.state())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_levels() {
        let f = CircleGridField::default();
        assert_eq!(f.centers.len(), 25);
        assert_eq!(circle_cost(&f, &[0.3, 0.7]), 1.0);
        assert_eq!(circle_cost(&f, &[0.2, 0.2]), 0.0);
        let mid = 0.5 * (f.radius + f.falloff);
        assert!((circle_cost(&f, &[0.5 + mid, 0.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ramp_decreases_with_distance() {
        let f = CircleGridField::default();
        let costs: Vec<f64> = (0..=20)
            .map(|k| circle_cost(&f, &[0.1 + 0.05 + 0.04 * k as f64 / 20.0, 0.1]))
            .collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(costs[0], 1.0);
        assert_eq!(costs[20], 0.0);
    }

    #[test]
    fn rejects_inverted_radii() {
        let f = CircleGridField {
            radius: 0.1,
            falloff: 0.05,
            ..CircleGridField::default()
        };
        assert!(f.validate().is_err());
    }
}
