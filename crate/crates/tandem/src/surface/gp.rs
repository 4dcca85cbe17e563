//! Gaussian-process machinery for generating synthetic surface pairs.
//!
//! A surface is drawn in two steps that mirror how the generator is used
//! downstream: anchor targets are sampled from the prior at a random subset
//! of the domain, and the remaining domain values are then drawn from the
//! posterior conditioned on those anchors. Posterior draws use the pathwise
//! (Matheron) update `f* = f_prior + K_dt (K_tt + εI)⁻¹ (y_t − f_prior,t)`,
//! which needs one prior draw over the domain plus a factorization of the
//! small anchor covariance only. On tensor-product grids the prior draw
//! itself factorizes per axis, so the 10 000-point 2-D domain never
//! materializes a dense 10⁴×10⁴ covariance.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve};
use super::Domain;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Ratio of the jitter added to covariance diagonals relative to the kernel
/// variance, to keep Cholesky factorizations of smooth kernels stable.
pub const JITTER_RATIO: f64 = 1e-6;

/// Squared-exponential kernel `σ² exp(−‖a−b‖² / 2ℓ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub variance: f64,
    pub length_scale: f64,
}

impl RbfKernel {
    pub fn new(variance: f64, length_scale: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::argument(format!("kernel variance must be positive, got {variance}")));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::argument(format!("kernel length scale must be positive, got {length_scale}")));
        }
        Ok(Self { variance, length_scale })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        self.variance * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// Cross-covariance matrix between two point sets (rows are points).
    pub fn matrix(&self, xa: ArrayView2<'_, f64>, xb: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut k = Array2::<f64>::zeros((xa.nrows(), xb.nrows()));
        for i in 0..xa.nrows() {
            let ai = xa.row(i);
            for j in 0..xb.nrows() {
                k[(i, j)] = self.eval(ai.as_slice().unwrap(), xb.row(j).as_slice().unwrap());
            }
        }
        k
    }

    /// Self-covariance with jitter on the diagonal.
    pub fn matrix_jittered(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut k = self.matrix(x, x);
        let jitter = JITTER_RATIO * self.variance;
        for i in 0..x.nrows() {
            k[(i, i)] += jitter;
        }
        k
    }
}

/// Exact posterior mean and covariance from dense conditioning.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub mean: Array1<f64>,
    pub cov: Array2<f64>,
}

/// Conditions the prior on `(x_train, y_train)` and evaluates the posterior
/// at `x_query` with dense linear algebra. Intended for modest problem
/// sizes; the surface generator itself goes through [`gp_surface_sample`].
pub fn gp_posterior(
    kernel: &RbfKernel,
    x_train: ArrayView2<'_, f64>,
    y_train: ArrayView1<'_, f64>,
    x_query: ArrayView2<'_, f64>,
) -> Result<GpPosterior> {
    if x_train.nrows() != y_train.len() {
        return Err(Error::Shape {
            expected: format!("{} training targets", x_train.nrows()),
            actual: format!("{}", y_train.len()),
        });
    }
    if x_train.nrows() == 0 {
        return Err(Error::argument("conditioning requires at least one training point"));
    }
    if x_train.ncols() != x_query.ncols() {
        return Err(Error::Shape {
            expected: format!("query dimension {}", x_train.ncols()),
            actual: format!("{}", x_query.ncols()),
        });
    }
    let k_tt = kernel.matrix_jittered(x_train);
    let l = cholesky(k_tt.view())?;
    let k_qt = kernel.matrix(x_query, x_train);
    let k_qq = kernel.matrix(x_query, x_query);

    let alpha = cholesky_solve(l.view(), y_train);
    let mean = k_qt.dot(&alpha);

    // cov = K_qq − K_qt (K_tt + εI)⁻¹ K_tq, built column-by-column.
    let mut cov = k_qq;
    for j in 0..x_query.nrows() {
        let col = cholesky_solve(l.view(), k_qt.row(j));
        for i in 0..x_query.nrows() {
            cov[(i, j)] -= k_qt.row(i).dot(&col);
        }
    }
    // Conditioning leaves tiny asymmetries; restore exact symmetry.
    for i in 0..cov.nrows() {
        for j in 0..i {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    Ok(GpPosterior { mean, cov })
}

/// Draws from `N(mean, cov)` with dense Cholesky sampling.
pub fn sample_multivariate_normal(
    mean: ArrayView1<'_, f64>,
    cov: ArrayView2<'_, f64>,
    jitter: f64,
    rng: &mut Rng,
) -> Result<Array1<f64>> {
    let n = mean.len();
    let mut k = cov.to_owned();
    for i in 0..n {
        k[(i, i)] += jitter;
    }
    let l = cholesky(k.view())?;
    let z = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(&mean + &l.dot(&z))
}

/// One exact prior draw over the domain.
///
/// 1-D domains factor through a dense Cholesky of the full covariance;
/// tensor-product grids use the Kronecker identity
/// `chol(σ² K₀⊗K₁) = σ (chol K₀ ⊗ chol K₁)` so only per-axis factors are
/// ever formed.
pub fn gp_prior_sample(kernel: &RbfKernel, domain: &Domain, rng: &mut Rng) -> Result<Array1<f64>> {
    match domain.shape() {
        [_] => {
            let pts = domain.points();
            let k = kernel.matrix_jittered(pts.view());
            let l = cholesky(k.view())?;
            let z = Array1::from_iter((0..domain.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            Ok(l.dot(&z))
        }
        [n0, n1] => {
            let (n0, n1) = (*n0, *n1);
            let unit = RbfKernel { variance: 1.0, length_scale: kernel.length_scale };
            let axis_factor = |coords: &[f64]| -> Result<Array2<f64>> {
                let x = Array2::from_shape_vec((coords.len(), 1), coords.to_vec())
                    .expect("axis coordinates reshape");
                // Jitter on each axis factor keeps the Kronecker product
                // positive definite; the product differs from a single
                // full-matrix jitter by O(ε) which is far below draw scale.
                cholesky(unit.matrix_jittered(x.view()).view())
            };
            let l0 = axis_factor(&domain.axis_coords(0))?;
            let l1 = axis_factor(&domain.axis_coords(1))?;
            let mut z = Array2::<f64>::zeros((n0, n1));
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            // vec(L₀ Z L₁ᵀ) in row-major order realises (L₀ ⊗ L₁) vec(Z).
            let s = l0.dot(&z).dot(&l1.t()) * kernel.variance.sqrt();
            Ok(Array1::from_iter(s.iter().copied()))
        }
        other => Err(Error::argument(format!(
            "prior sampling supports 1-D and 2-D domains, got {} axes",
            other.len()
        ))),
    }
}

/// Pathwise posterior draw over the whole domain given anchor targets.
///
/// `anchor_idx` are domain indices; `y_anchor` the conditioning targets;
/// `prior_draw` one prior realisation over the full domain.
pub fn gp_pathwise_update(
    kernel: &RbfKernel,
    domain: &Domain,
    anchor_idx: &[usize],
    y_anchor: ArrayView1<'_, f64>,
    prior_draw: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if anchor_idx.len() != y_anchor.len() {
        return Err(Error::Shape {
            expected: format!("{} anchor targets", anchor_idx.len()),
            actual: format!("{}", y_anchor.len()),
        });
    }
    if prior_draw.len() != domain.len() {
        return Err(Error::Shape {
            expected: format!("prior draw of length {}", domain.len()),
            actual: format!("{}", prior_draw.len()),
        });
    }
    let pts = domain.points();
    let mut x_t = Array2::<f64>::zeros((anchor_idx.len(), domain.dim()));
    for (r, &i) in anchor_idx.iter().enumerate() {
        if i >= domain.len() {
            return Err(Error::argument(format!("anchor index {i} outside domain of {}", domain.len())));
        }
        x_t.row_mut(r).assign(&pts.row(i));
    }
    let l = cholesky(kernel.matrix_jittered(x_t.view()).view())?;
    let resid = Array1::from_iter(
        anchor_idx.iter().zip(y_anchor.iter()).map(|(&i, &y)| y - prior_draw[i]),
    );
    let alpha = cholesky_solve(l.view(), resid.view());
    let k_dt = kernel.matrix(pts.view(), x_t.view());
    Ok(&prior_draw + &k_dt.dot(&alpha))
}

/// Draws one synthetic surface: anchor targets from the prior at a uniform
/// random subset of the domain, then a pathwise posterior draw everywhere.
pub fn gp_surface_sample(
    kernel: &RbfKernel,
    domain: &Domain,
    n_anchors: usize,
    rng: &mut Rng,
) -> Result<Array1<f64>> {
    if n_anchors == 0 || n_anchors > domain.len() {
        return Err(Error::argument(format!(
            "anchor count must be in 1..={}, got {n_anchors}",
            domain.len()
        )));
    }
    let mut anchor_idx = rand::seq::index::sample(rng, domain.len(), n_anchors).into_vec();
    anchor_idx.sort_unstable();

    let pts = domain.points();
    let mut x_t = Array2::<f64>::zeros((n_anchors, domain.dim()));
    for (r, &i) in anchor_idx.iter().enumerate() {
        x_t.row_mut(r).assign(&pts.row(i));
    }
    let l_tt = cholesky(kernel.matrix_jittered(x_t.view()).view())?;
    let z = Array1::from_iter((0..n_anchors).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let y_t = l_tt.dot(&z);

    let prior = gp_prior_sample(kernel, domain, rng)?;
    gp_pathwise_update(kernel, domain, &anchor_idx, y_t.view(), prior.view())
}
