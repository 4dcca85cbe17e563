//! Dual-fidelity surrogate modeling and closed-loop optimization.
//!
//! The toolkit connects a cheap, systematically biased evaluator to an
//! expensive, trusted one:
//!
//! - [`twin`] trains a twin-branch network that learns the cheap response
//!   surface and two explicit bias corrections mapping it onto the
//!   expensive one, so a handful of expensive measurements inherit the
//!   detail of many cheap ones.
//! - [`surface`] generates ground-truth test beds: Gaussian-process surface
//!   pairs with controlled rank correlation, closed-form trigonometric
//!   pairs with known bias structure, and classic analytic benchmarks.
//! - [`planner`] proposes new evaluation points from a kernel-density
//!   acquisition that can blend in the twin's expensive-branch prediction,
//!   weighted by its cross-validated reliability.
//! - [`campaign`] runs the closed loop — propose, measure, retrain — and
//!   compares sampling strategies across paired seeds.
//!
//! All randomness flows from explicit `u64` seeds through counter-based
//! child streams ([`rng`]), so every artifact the toolkit writes is
//! bit-for-bit reproducible.

pub mod campaign;
pub mod data;
pub mod error;
pub mod nn;
pub mod planner;
pub mod rng;
pub mod stats;
pub mod surface;
pub mod twin;

pub use data::{Dataset, Fidelity, Normalizer, Observation};
pub use error::{Error, Result};
pub use twin::{Hyperparams, Prediction, TwinModel};
