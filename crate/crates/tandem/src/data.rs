//! Observations, datasets, and normalization.
//!
//! A dual-fidelity dataset mixes measurements from two evaluators of the same
//! quantity: a cheap, biased one and an expensive, trusted one. All model
//! code consumes [`Dataset`]; normalization is handled by [`Normalizer`] and
//! its statistics travel with trained models.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which evaluator produced an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Cheap,
    Expensive,
}

impl Fidelity {
    /// Stable index for per-fidelity arrays.
    pub fn index(self) -> usize {
        match self {
            Fidelity::Cheap => 0,
            Fidelity::Expensive => 1,
        }
    }
}

/// One measured point: parameters `x`, scalar target `y`, and the evaluator
/// that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
    pub fidelity: Fidelity,
}

impl Observation {
    pub fn cheap(x: Vec<f64>, y: f64) -> Self {
        Observation { x, y, fidelity: Fidelity::Cheap }
    }

    pub fn expensive(x: Vec<f64>, y: f64) -> Self {
        Observation { x, y, fidelity: Fidelity::Expensive }
    }
}

/// A collection of observations with a fixed parameter dimension.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset { dim, observations: Vec::new() }
    }

    /// Build from parallel slices of cheap and expensive points.
    pub fn from_slices(
        cheap: &[(Vec<f64>, f64)],
        expensive: &[(Vec<f64>, f64)],
    ) -> Result<Self> {
        let dim = cheap
            .first()
            .or(expensive.first())
            .map(|(x, _)| x.len())
            .ok_or_else(|| Error::argument("dataset needs at least one observation"))?;
        let mut ds = Dataset::new(dim);
        for (x, y) in cheap {
            ds.push(Observation::cheap(x.clone(), *y))?;
        }
        for (x, y) in expensive {
            ds.push(Observation::expensive(x.clone(), *y))?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if obs.x.len() != self.dim {
            return Err(Error::Shape {
                expected: format!("x of length {}", self.dim),
                actual: format!("length {}", obs.x.len()),
            });
        }
        if !obs.x.iter().all(|v| v.is_finite()) || !obs.y.is_finite() {
            return Err(Error::argument("observation contains non-finite values"));
        }
        self.observations.push(obs);
        Ok(())
    }

    pub fn push_cheap(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        self.push(Observation::cheap(x, y))
    }

    pub fn push_expensive(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        self.push(Observation::expensive(x, y))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter()
    }

    pub fn count(&self, fidelity: Fidelity) -> usize {
        self.observations.iter().filter(|o| o.fidelity == fidelity).count()
    }

    /// Matrix/vector view of one fidelity's observations, in insertion order.
    pub fn split(&self, fidelity: Fidelity) -> (Array2<f64>, Array1<f64>) {
        let rows: Vec<&Observation> =
            self.observations.iter().filter(|o| o.fidelity == fidelity).collect();
        let mut xs = Array2::zeros((rows.len(), self.dim));
        let mut ys = Array1::zeros(rows.len());
        for (i, obs) in rows.iter().enumerate() {
            for (j, v) in obs.x.iter().enumerate() {
                xs[[i, j]] = *v;
            }
            ys[i] = obs.y;
        }
        (xs, ys)
    }
}

/// Input/target normalization fitted on training data.
///
/// Inputs are min-max scaled to `[0,1]` per dimension. Targets are z-scored
/// *per fidelity*: each evaluator's observations are centered and scaled by
/// their own statistics. Standardizing the fidelities separately keeps the
/// corrections the bias networks must express small whenever the surfaces
/// are correlated — zeroed bias networks then already predict the expensive
/// surface up to an affine recalibration — instead of burdening them with
/// the gross offset and scale difference between the evaluators.
///
/// A fidelity with no observations inherits the statistics of all
/// observations; one with zero spread (fewer than two distinct values)
/// borrows the other's scale so both stay comparable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalizer {
    x_lo: Vec<f64>,
    x_span: Vec<f64>,
    y_mean: [f64; 2],
    y_scale: f64,
}

impl Normalizer {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::argument("cannot fit normalizer on an empty dataset"));
        }
        let dim = dataset.dim();
        let mut x_lo = vec![f64::INFINITY; dim];
        let mut x_hi = vec![f64::NEG_INFINITY; dim];
        for obs in dataset.iter() {
            for j in 0..dim {
                x_lo[j] = x_lo[j].min(obs.x[j]);
                x_hi[j] = x_hi[j].max(obs.x[j]);
            }
        }
        let x_span: Vec<f64> = x_lo
            .iter()
            .zip(&x_hi)
            .map(|(lo, hi)| if hi - lo > 0.0 { hi - lo } else { 1.0 })
            .collect();

        let mean = |ys: &[f64]| ys.iter().sum::<f64>() / ys.len() as f64;
        let all_mean = {
            let all: Vec<f64> = dataset.iter().map(|o| o.y).collect();
            mean(&all)
        };
        let y_mean = [Fidelity::Cheap, Fidelity::Expensive].map(|f| {
            let ys: Vec<f64> =
                dataset.iter().filter(|o| o.fidelity == f).map(|o| o.y).collect();
            if ys.is_empty() { all_mean } else { mean(&ys) }
        });
        // Pool the squared deviations of every observation from its own
        // fidelity's mean. A lone observation contributes zero, so a fidelity
        // with too few points to define a spread inherits the other one's.
        let pooled_var = dataset
            .iter()
            .map(|o| (o.y - y_mean[o.fidelity.index()]).powi(2))
            .sum::<f64>()
            / dataset.len() as f64;
        let y_scale = if pooled_var > 0.0 { pooled_var.sqrt() } else { 1.0 };

        Ok(Normalizer { x_lo, x_span, y_mean, y_scale })
    }

    /// Identity transform for callers that already work in model units.
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            x_lo: vec![0.0; dim],
            x_span: vec![1.0; dim],
            y_mean: [0.0; 2],
            y_scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x_lo.len()
    }

    pub fn norm_x_into(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..x.len() {
            out[j] = (x[j] - self.x_lo[j]) / self.x_span[j];
        }
    }

    pub fn norm_x_matrix(&self, xs: &Array2<f64>) -> Array2<f64> {
        let mut out = xs.clone();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - self.x_lo[j]) / self.x_span[j];
            }
        }
        out
    }

    pub fn norm_y(&self, y: f64, fidelity: Fidelity) -> f64 {
        (y - self.y_mean[fidelity.index()]) / self.y_scale
    }

    pub fn denorm_y(&self, y: f64, fidelity: Fidelity) -> f64 {
        y * self.y_scale + self.y_mean[fidelity.index()]
    }

    /// Scale factor between normalized and raw target units.
    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }
}
