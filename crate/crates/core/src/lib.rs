//! Parallel path optimization by alternating pods.
//!
//! A path is a sequence of waypoints in `R^n`. The objective is a weighted
//! sum of per-waypoint terms, each of which may read a few neighbouring
//! waypoints through finite-difference stencils, plus a boundary term on the
//! endpoints. [`strobe::strobe_optimize`] splits the path into contiguous
//! pods coloured blue and red, optimizes all blue pods in parallel, then all
//! red pods, and repeats until the whole path stops changing.

pub mod baselines;
pub mod error;
pub mod objective;
pub mod optimize;
pub mod path;
pub mod pods;
pub mod scenarios;
pub mod strobe;

pub use error::{Error, Result};
