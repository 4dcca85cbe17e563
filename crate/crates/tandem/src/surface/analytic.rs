//! Classic analytic benchmark surfaces, exposed over the unit hypercube.
//!
//! Each surface is defined on its conventional native box and reached by an
//! affine map from `[0,1]^d`, so optimizers and surface pairs can treat all
//! of them uniformly. The catalogue spans a ladder of ruggedness from the
//! convex parabolic bowl up to the deceptive Schwefel landscape.

use serde::{Deserialize, Serialize};

use super::{Domain, PairProvenance, SurfacePair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticSurface {
    /// Parabolic bowl `Σ zᵢ²` on `[-5.12, 5.12]`.
    Dejong,
    /// Axis-weighted bowl `Σ (i·zᵢ)²` on `[-5.12, 5.12]`.
    HyperEllipsoid,
    /// Exponentially flattened multimodal well on `[-32.768, 32.768]`.
    AckleyPath,
    /// Cosine-rippled bowl `10d + Σ (zᵢ² − 10 cos 2πzᵢ)` on `[-5.12, 5.12]`.
    Rastrigin,
    /// Steep-valleyed product surface on `[0, π]`.
    Michalewicz,
    /// Deceptive sine landscape `418.9829 d − Σ zᵢ sin √|zᵢ|` on `[-500, 500]`.
    Schwefel,
}

impl AnalyticSurface {
    pub const ALL: [AnalyticSurface; 6] = [
        AnalyticSurface::Dejong,
        AnalyticSurface::HyperEllipsoid,
        AnalyticSurface::AckleyPath,
        AnalyticSurface::Rastrigin,
        AnalyticSurface::Michalewicz,
        AnalyticSurface::Schwefel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticSurface::Dejong => "dejong",
            AnalyticSurface::HyperEllipsoid => "hyper_ellipsoid",
            AnalyticSurface::AckleyPath => "ackley_path",
            AnalyticSurface::Rastrigin => "rastrigin",
            AnalyticSurface::Michalewicz => "michalewicz",
            AnalyticSurface::Schwefel => "schwefel",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
                Error::argument(format!("unknown surface {name:?}; expected one of {known:?}"))
            })
    }

    /// Native coordinate box of the canonical definition.
    pub fn native_bounds(&self) -> (f64, f64) {
        match self {
            AnalyticSurface::Dejong
            | AnalyticSurface::HyperEllipsoid
            | AnalyticSurface::Rastrigin => (-5.12, 5.12),
            AnalyticSurface::AckleyPath => (-32.768, 32.768),
            AnalyticSurface::Michalewicz => (0.0, std::f64::consts::PI),
            AnalyticSurface::Schwefel => (-500.0, 500.0),
        }
    }

    /// Evaluates in native coordinates.
    pub fn eval_native(&self, z: &[f64]) -> f64 {
        let d = z.len() as f64;
        match self {
            AnalyticSurface::Dejong => z.iter().map(|v| v * v).sum(),
            AnalyticSurface::HyperEllipsoid => z
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let w = (i + 1) as f64 * v;
                    w * w
                })
                .sum(),
            AnalyticSurface::AckleyPath => {
                let sq = z.iter().map(|v| v * v).sum::<f64>() / d;
                let cs = z.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>() / d;
                -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + std::f64::consts::E
            }
            AnalyticSurface::Rastrigin => {
                10.0 * d
                    + z.iter()
                        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>()
            }
            AnalyticSurface::Michalewicz => {
                let m = 10;
                -z.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let arg = (i + 1) as f64 * v * v / std::f64::consts::PI;
                        v.sin() * arg.sin().powi(2 * m)
                    })
                    .sum::<f64>()
            }
            AnalyticSurface::Schwefel => {
                418.9829 * d - z.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
            }
        }
    }

    /// Evaluates at a unit-hypercube point, mapping affinely onto the
    /// native box first.
    pub fn eval_unit(&self, u: &[f64]) -> f64 {
        let (lo, hi) = self.native_bounds();
        let z: Vec<f64> = u.iter().map(|v| lo + (hi - lo) * v).collect();
        self.eval_native(&z)
    }
}

/// Evaluates two analytic surfaces on a shared unit-domain grid.
pub fn analytic_pair(
    cheap: AnalyticSurface,
    expensive: AnalyticSurface,
    shape: &[usize],
) -> Result<SurfacePair> {
    let domain = Domain::grid(0.0, 1.0, shape)?;
    let pts = domain.points();
    let y_cheap: Vec<f64> =
        pts.rows().into_iter().map(|r| cheap.eval_unit(r.as_slice().unwrap())).collect();
    let y_exp: Vec<f64> =
        pts.rows().into_iter().map(|r| expensive.eval_unit(r.as_slice().unwrap())).collect();
    SurfacePair::from_values(
        domain,
        y_cheap,
        y_exp,
        PairProvenance::Analytic {
            cheap: cheap.name().to_string(),
            expensive: expensive.name().to_string(),
        },
    )
}
