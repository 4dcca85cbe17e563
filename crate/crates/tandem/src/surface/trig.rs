//! Closed-form trigonometric surface pairs with known bias structure.
//!
//! Each pair ships a cheap surface `f_c`, an expensive surface `f_e`, and
//! the two bias functions that connect them: a parameter-space shift `f_p`
//! and a target-space shift `f_t` satisfying
//!
//! ```text
//! f_e(x) = f_c(x + f_p(x)) + f_t(x)        for all x in [0, 1]
//! ```
//!
//! The three pairs grade the bias complexity: constant shifts, linear
//! shifts, and polynomial shifts. They are the ground truth for testing
//! that a twin model's bias branches recover structure of each order.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Domain, PairProvenance, SurfacePair};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::child_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigPairKind {
    /// Constant biases: `f_p = 3/8`, `f_t = −2`.
    Constant,
    /// Linear biases: `f_p = x`, `f_t = 2x`.
    Linear,
    /// Polynomial biases: `f_p = x²`, `f_t = x³`.
    Nonlinear,
}

impl TrigPairKind {
    pub const ALL: [TrigPairKind; 3] =
        [TrigPairKind::Constant, TrigPairKind::Linear, TrigPairKind::Nonlinear];

    pub fn name(&self) -> &'static str {
        match self {
            TrigPairKind::Constant => "constant",
            TrigPairKind::Linear => "linear",
            TrigPairKind::Nonlinear => "nonlinear",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(TrigPairKind::Constant),
            "linear" => Ok(TrigPairKind::Linear),
            "nonlinear" => Ok(TrigPairKind::Nonlinear),
            other => Err(Error::argument(format!(
                "unknown trig pair {other:?}; expected constant, linear, or nonlinear"
            ))),
        }
    }

    pub fn cheap(&self, x: f64) -> f64 {
        match self {
            TrigPairKind::Constant => (4.0 * PI * x).cos() + 2.0,
            TrigPairKind::Linear => (2.0 * PI * x).sin(),
            TrigPairKind::Nonlinear => (3.0 * PI * x).sin(),
        }
    }

    pub fn expensive(&self, x: f64) -> f64 {
        match self {
            TrigPairKind::Constant => (4.0 * PI * x).sin(),
            TrigPairKind::Linear => (4.0 * PI * x).sin() + 2.0 * x,
            TrigPairKind::Nonlinear => (3.0 * PI * (x + x * x)).sin() + x * x * x,
        }
    }

    /// Parameter-space bias `f_p`.
    pub fn param_bias(&self, x: f64) -> f64 {
        match self {
            TrigPairKind::Constant => 3.0 / 8.0,
            TrigPairKind::Linear => x,
            TrigPairKind::Nonlinear => x * x,
        }
    }

    /// Target-space bias `f_t`.
    pub fn target_bias(&self, x: f64) -> f64 {
        match self {
            TrigPairKind::Constant => -2.0,
            TrigPairKind::Linear => 2.0 * x,
            TrigPairKind::Nonlinear => x * x * x,
        }
    }
}

/// Evaluates a pair on an evenly spaced grid over the unit interval.
pub fn trig_surface_pair(kind: TrigPairKind, n_points: usize) -> Result<SurfacePair> {
    let domain = Domain::grid(0.0, 1.0, &[n_points])?;
    let xs = domain.axis_coords(0);
    let y_cheap: Vec<f64> = xs.iter().map(|&x| kind.cheap(x)).collect();
    let y_exp: Vec<f64> = xs.iter().map(|&x| kind.expensive(x)).collect();
    SurfacePair::from_values(
        domain,
        y_cheap,
        y_exp,
        PairProvenance::Trig { pair: kind.name().to_string() },
    )
}

/// Draws a training set for a pair: `n_cheap` cheap and `n_exp` expensive
/// observations at positions sampled uniformly from the unit interval.
pub fn trig_training_set(
    kind: TrigPairKind,
    n_cheap: usize,
    n_exp: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_cheap + n_exp == 0 {
        return Err(Error::argument("training set needs at least one observation"));
    }
    let mut ds = Dataset::new(1);
    let mut cheap_rng = child_rng(seed, 0);
    for _ in 0..n_cheap {
        let x: f64 = cheap_rng.random_range(0.0..1.0);
        ds.push_cheap(vec![x], kind.cheap(x))?;
    }
    let mut exp_rng = child_rng(seed, 1);
    for _ in 0..n_exp {
        let x: f64 = exp_rng.random_range(0.0..1.0);
        ds.push_expensive(vec![x], kind.expensive(x))?;
    }
    Ok(ds)
}
