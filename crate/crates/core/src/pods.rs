//! Splitting a path into alternating blue/red pods.
//!
//! The pod count is as high as possible without exceeding two pods per
//! worker (one blue and one red), and without any pod shorter than the buffer
//! length `ell`. Sizes differ by at most one, larger pods first, and colors
//! alternate starting with blue. Since every pod has at least `ell`
//! waypoints, any two pods of the same color are at least `ell` indices
//! apart.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    #[serde(rename = "B")]
    Blue,
    #[serde(rename = "R")]
    Red,
}

impl Color {
    pub fn other(self) -> Color {
        match self {
            Color::Blue => Color::Red,
            Color::Red => Color::Blue,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Blue => "B",
            Color::Red => "R",
        })
    }
}

/// A consecutive, inclusive range of waypoint indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pod {
    pub start: usize,
    pub end: usize,
    pub color: Color,
}

impl Pod {
    pub fn new(start: usize, end: usize, color: Color) -> Self {
        debug_assert!(start <= end);
        Self { start, end, color }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..=self.end).contains(&i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodPartition {
    pods: Vec<Pod>,
    ell: usize,
    workers: usize,
    waypoints: usize,
}

impl PodPartition {
    pub fn pods(&self) -> &[Pod] {
        &self.pods
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Total number of waypoints covered.
    pub fn waypoints(&self) -> usize {
        self.waypoints
    }

    pub fn len(&self) -> usize {
        self.pods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pods.is_empty()
    }

    /// Longest pod length (the `wpp_max` of the split).
    pub fn max_pod_len(&self) -> usize {
        self.pods.iter().map(Pod::len).max().unwrap_or(0)
    }

    pub fn pods_of_color(&self, color: Color) -> Vec<Pod> {
        self.pods.iter().filter(|p| p.color == color).copied().collect()
    }

    /// The pod containing waypoint `i`.
    pub fn pod_of(&self, i: usize) -> Option<&Pod> {
        self.pods.iter().find(|p| p.contains(i))
    }

    /// Checks every structural invariant; returns a description of the first
    /// violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let Some(first) = self.pods.first() else {
            return Err("no pods".into());
        };
        if first.start != 0 {
            return Err(format!("first pod starts at {}", first.start));
        }
        for w in self.pods.windows(2) {
            if w[1].start != w[0].end + 1 {
                return Err(format!("gap or overlap between {:?} and {:?}", w[0], w[1]));
            }
            if w[0].color == w[1].color {
                return Err(format!("adjacent pods share color {}", w[0].color));
            }
        }
        let last = self.pods.last().expect("nonempty");
        if last.end + 1 != self.waypoints {
            return Err(format!(
                "pods cover {} of {} waypoints",
                last.end + 1,
                self.waypoints
            ));
        }
        if let Some(short) = self.pods.iter().find(|p| p.len() < self.ell) {
            return Err(format!("pod {short:?} shorter than ell = {}", self.ell));
        }
        for color in [Color::Blue, Color::Red] {
            let count = self.pods.iter().filter(|p| p.color == color).count();
            if count > self.workers {
                return Err(format!("{count} {color} pods for {} workers", self.workers));
            }
        }
        Ok(())
    }

    /// Debug dump: `[{"start":..,"end":..,"color":"B"|"R"}, ...]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.pods).expect("pod serialization cannot fail")
    }
}

/// Number of pods used for `waypoints` waypoints, `workers` workers and
/// minimum pod length `ell`.
pub fn pod_count(waypoints: usize, workers: usize, ell: usize) -> usize {
    (2 * workers).min(waypoints / ell).max(1)
}

pub fn split_path(waypoints: usize, workers: usize, ell: usize) -> Result<PodPartition> {
    if ell == 0 || workers == 0 {
        return Err(Error::InvalidPartition(format!(
            "workers = {workers} and ell = {ell} must both be positive"
        )));
    }
    if waypoints < ell {
        return Err(Error::TooFewWaypoints { waypoints, ell });
    }
    let count = pod_count(waypoints, workers, ell);
    let wpp_max = waypoints.div_ceil(count);
    let wpp_min = wpp_max - 1;
    let n_max = waypoints - count * wpp_min;
    let n_min = count - n_max;

    let mut pods = Vec::with_capacity(count);
    let mut remaining = waypoints;
    for size in std::iter::repeat_n(wpp_max, n_max).chain(std::iter::repeat_n(wpp_min, n_min)) {
        remaining -= add_pod(&mut pods, remaining, size, ell)?;
    }
    // the closed form never leaves a remainder; absorb defensively if it did
    if remaining > 0 {
        add_pod(&mut pods, remaining, remaining, ell)?;
    }
    for (k, pod) in pods.iter_mut().enumerate() {
        pod.color = if k % 2 == 0 { Color::Blue } else { Color::Red };
    }
    Ok(PodPartition {
        pods,
        ell,
        workers,
        waypoints,
    })
}

/// Appends a pod of `size` waypoints after the existing pods, given that
/// `remaining` waypoints are still uncovered. A short remainder becomes its
/// own truncated pod when it is at least `ell` long, and is otherwise
/// absorbed by the last pod. Returns the number of waypoints consumed.
///
/// New pods are colored blue; [`split_path`] assigns the final colors.
pub fn add_pod(pods: &mut Vec<Pod>, remaining: usize, size: usize, ell: usize) -> Result<usize> {
    if remaining == 0 || size == 0 {
        return Ok(0);
    }
    let start = pods.last().map_or(0, |p| p.end + 1);
    if remaining >= size {
        pods.push(Pod::new(start, start + size - 1, Color::Blue));
        Ok(size)
    } else if remaining >= ell {
        pods.push(Pod::new(start, start + remaining - 1, Color::Blue));
        Ok(remaining)
    } else {
        let last = pods.last_mut().ok_or(Error::AbsorbIntoEmpty(remaining))?;
        last.end += remaining;
        Ok(remaining)
    }
}
