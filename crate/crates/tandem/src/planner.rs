//! Kernel-density acquisition planning.
//!
//! The planner scores candidate points with
//!
//! ```text
//!           Σₖ f_k p_k(x) + λ·p_u(x) + ρ·g(x)
//! α(x)  =  ───────────────────────────────────
//!             Σₖ p_k(x) + p_u(x) + 1
//! ```
//!
//! where `p_k` is an isotropic Gaussian kernel at observation `k`, `p_u ≡ 1`
//! is the uniform density on the unit hypercube, `λ` trades exploration
//! against exploitation (alternating between ±1), and `g` is an optional
//! model prediction of the expensive response whose influence is gated by
//! the reliability weight `ρ`. With `ρ` zero or undefined the last numerator
//! term vanishes and the score reduces exactly to the base form — the
//! denominator never changes, staying ≥ 2 everywhere on the hypercube.
//!
//! Minimization convention throughout: proposals are argmins of `α`.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::twin::{rho_cv, Hyperparams, RhoCv, TwinModel};

/// Uniform density on the unit hypercube.
pub const P_UNIFORM: f64 = 1.0;
/// The constant `𝟙` in the acquisition denominator.
pub const DENOM_ONE: f64 = 1.0;

/// Gaussian kernel-density surrogate over `[0,1]^P`.
#[derive(Debug, Clone)]
pub struct KdeSurrogate {
    xs: Vec<Vec<f64>>,
    fs: Vec<f64>,
    bandwidth: f64,
    dim: usize,
}

/// Scott-type bandwidth `0.5·N^{−1/(P+4)}`, clipped to `[0.02, 0.5]`.
pub fn scott_bandwidth(n_obs: usize, dim: usize) -> f64 {
    let n = n_obs.max(1) as f64;
    let h = 0.5 * n.powf(-1.0 / (dim as f64 + 4.0));
    h.clamp(0.02, 0.5)
}

impl KdeSurrogate {
    /// Builds a surrogate from `(x, f)` observations with an explicit
    /// bandwidth. Inputs must lie in the unit hypercube.
    pub fn new(observations: &[(Vec<f64>, f64)], dim: usize, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::argument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if dim == 0 {
            return Err(Error::argument("surrogate dimension must be positive"));
        }
        let mut xs = Vec::with_capacity(observations.len());
        let mut fs = Vec::with_capacity(observations.len());
        for (x, f) in observations {
            if x.len() != dim {
                return Err(Error::Shape {
                    expected: format!("observation of dimension {dim}"),
                    actual: format!("{}", x.len()),
                });
            }
            if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::argument(format!("observation {x:?} outside the unit hypercube")));
            }
            if !f.is_finite() {
                return Err(Error::argument("observed objective values must be finite"));
            }
            xs.push(x.clone());
            fs.push(*f);
        }
        Ok(Self { xs, fs, bandwidth, dim })
    }

    /// Convenience constructor with the Scott-type annealed bandwidth.
    pub fn with_annealed_bandwidth(observations: &[(Vec<f64>, f64)], dim: usize) -> Result<Self> {
        Self::new(observations, dim, scott_bandwidth(observations.len(), dim))
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Isotropic Gaussian kernel density of observation `k` at `x`.
    pub fn kernel_density(&self, k: usize, x: &[f64]) -> f64 {
        let h2 = self.bandwidth * self.bandwidth;
        let d2: f64 = self.xs[k].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm = (2.0 * std::f64::consts::PI * h2).powf(-(self.dim as f64) / 2.0);
        norm * (-d2 / (2.0 * h2)).exp()
    }

    /// Returns `(Σ f_k p_k(x), Σ p_k(x))`.
    pub fn density_terms(&self, x: &[f64]) -> (f64, f64) {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for k in 0..self.xs.len() {
            let p = self.kernel_density(k, x);
            weighted += self.fs[k] * p;
            total += p;
        }
        (weighted, total)
    }
}

/// Acquisition configuration for one evaluation: the active λ, the
/// reliability gate ρ (`None` = undefined = ignore the model), and the
/// model's mean prediction `g(x)` when available.
#[derive(Clone, Copy)]
pub struct AcquisitionContext<'a> {
    pub lambda: f64,
    pub rho: Option<f64>,
    pub predictor: Option<&'a dyn MeanPredictor>,
}

/// Batched mean prediction over unit-hypercube points, the `g(x)` handle.
pub trait MeanPredictor {
    fn mean_batch(&self, xs: &Array2<f64>) -> Result<Vec<f64>>;
}

impl MeanPredictor for TwinModel {
    fn mean_batch(&self, xs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_expensive(xs)?.into_iter().map(|p| p.mean).collect())
    }
}

/// Affine objective rescaling shared by observed values and predictions so
/// both enter the acquisition in the same units.
#[derive(Debug, Clone, Copy)]
struct ObjectiveScale {
    lo: f64,
    span: f64,
}

impl ObjectiveScale {
    fn fit(fs: &[f64]) -> Self {
        let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi > lo) {
            // Constant or empty objective history: map everything to 0.5.
            return Self { lo: if lo.is_finite() { lo - 0.5 } else { 0.0 }, span: 1.0 };
        }
        Self { lo, span: hi - lo }
    }

    fn apply(&self, f: f64) -> f64 {
        (f - self.lo) / self.span
    }
}

/// Acquisition value at one point, given precomputed `g(x)`.
fn acquisition_with_g(
    surrogate: &KdeSurrogate,
    lambda: f64,
    rho_g: Option<(f64, f64)>,
    x: &[f64],
) -> f64 {
    let (weighted, total) = surrogate.density_terms(x);
    let mut numerator = weighted + lambda * P_UNIFORM;
    if let Some((rho, g)) = rho_g {
        numerator += rho * g;
    }
    numerator / (total + P_UNIFORM + DENOM_ONE)
}

/// Evaluates the acquisition at one point.
pub fn acquisition(x: &[f64], surrogate: &KdeSurrogate, ctx: &AcquisitionContext<'_>) -> Result<f64> {
    if x.len() != surrogate.dim() {
        return Err(Error::Shape {
            expected: format!("point of dimension {}", surrogate.dim()),
            actual: format!("{}", x.len()),
        });
    }
    let rho_g = match (ctx.rho, ctx.predictor) {
        (Some(rho), Some(pred)) => {
            let m = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row reshape");
            Some((rho, pred.mean_batch(&m)?[0]))
        }
        _ => None,
    };
    Ok(acquisition_with_g(surrogate, ctx.lambda, rho_g, x))
}

/// Search budget for one proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalSearch {
    /// Uniform candidate samples scored before refinement.
    pub n_samples: usize,
    /// Coordinate-descent refinement sweeps from the best sample.
    pub refine_steps: usize,
}

impl Default for ProposalSearch {
    fn default() -> Self {
        ProposalSearch { n_samples: 1024, refine_steps: 100 }
    }
}

/// One proposed evaluation point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub lambda: f64,
    /// Acquisition value at `x` (not meaningful when `degenerate`).
    pub acquisition: f64,
    /// True when the acquisition was flat across all candidates and the
    /// proposal fell back to a uniform random point.
    pub degenerate: bool,
}

/// Stateful planner: accumulates observations, alternates λ strategies
/// across proposals, and carries the reliability gate ρ between updates.
#[derive(Debug, Clone)]
pub struct Planner {
    dim: usize,
    lambdas: Vec<f64>,
    lambda_cursor: usize,
    observations: Vec<(Vec<f64>, f64)>,
    rho: Option<f64>,
    pub search: ProposalSearch,
}

impl Planner {
    pub fn new(dim: usize, lambdas: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::argument("planner dimension must be positive"));
        }
        if lambdas.is_empty() {
            return Err(Error::argument("planner needs at least one λ strategy"));
        }
        if lambdas.iter().any(|l| !(-1.0..=1.0).contains(l)) {
            return Err(Error::argument(format!("λ values must lie in [-1, 1], got {lambdas:?}")));
        }
        Ok(Planner {
            dim,
            lambdas,
            lambda_cursor: 0,
            observations: Vec::new(),
            rho: None,
            search: ProposalSearch::default(),
        })
    }

    /// Default two-strategy planner (λ = +1 exploitation, λ = −1 exploration).
    pub fn with_default_lambdas(dim: usize) -> Result<Self> {
        Self::new(dim, vec![1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn set_rho(&mut self, rho: Option<f64>) {
        self.rho = rho;
    }

    pub fn observations(&self) -> &[(Vec<f64>, f64)] {
        &self.observations
    }

    /// Records a measured objective value at a unit-hypercube point.
    pub fn observe(&mut self, x: Vec<f64>, f: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                expected: format!("point of dimension {}", self.dim),
                actual: format!("{}", x.len()),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::argument(format!("observation {x:?} outside the unit hypercube")));
        }
        if !f.is_finite() {
            return Err(Error::argument("objective value must be finite"));
        }
        self.observations.push((x, f));
        Ok(())
    }

    /// Refreshes ρ from the cross-validated reliability of a twin model on
    /// the given dataset: with fewer than two expensive observations ρ is
    /// undefined and the acquisition stays in its base form.
    pub fn update_rho(
        &mut self,
        dataset: &Dataset,
        k_folds: usize,
        hyper: &Hyperparams,
        seed: u64,
    ) -> Result<Option<RhoCv>> {
        let estimate = rho_cv(dataset, k_folds, hyper, seed)?;
        self.rho = estimate.as_ref().map(|e| e.rho);
        Ok(estimate)
    }

    /// Proposes `batch_size` points, cycling through the λ strategies
    /// round-robin (the cursor persists across calls, so consecutive
    /// single-point proposals alternate strategies).
    ///
    /// Each proposal scores `n_samples` uniform candidates and then runs
    /// coordinate-descent refinement from the best one: per sweep, each
    /// coordinate is probed one step up and down (radius shrinking
    /// geometrically from 0.1) and the best of the three values wins.
    pub fn propose(
        &mut self,
        batch_size: usize,
        predictor: Option<&dyn MeanPredictor>,
        rng: &mut Rng,
    ) -> Result<Vec<Proposal>> {
        if batch_size == 0 {
            return Err(Error::argument("batch size must be positive"));
        }
        let scale = ObjectiveScale::fit(
            &self.observations.iter().map(|(_, f)| *f).collect::<Vec<f64>>(),
        );
        let scaled: Vec<(Vec<f64>, f64)> = self
            .observations
            .iter()
            .map(|(x, f)| (x.clone(), scale.apply(*f)))
            .collect();
        let surrogate = KdeSurrogate::with_annealed_bandwidth(&scaled, self.dim)?;

        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let lambda = self.lambdas[self.lambda_cursor % self.lambdas.len()];
            self.lambda_cursor = (self.lambda_cursor + 1) % self.lambdas.len();
            out.push(self.propose_one(&surrogate, lambda, predictor, &scale, rng)?);
        }
        Ok(out)
    }

    fn propose_one(
        &self,
        surrogate: &KdeSurrogate,
        lambda: f64,
        predictor: Option<&dyn MeanPredictor>,
        scale: &ObjectiveScale,
        rng: &mut Rng,
    ) -> Result<Proposal> {
        let n = self.search.n_samples.max(1);
        let mut candidates = Array2::<f64>::zeros((n, self.dim));
        for v in candidates.iter_mut() {
            *v = rng.random_range(0.0..1.0);
        }
        let use_model = self.rho.is_some() && predictor.is_some();
        let g_values: Option<Vec<f64>> = if use_model {
            let raw = predictor.unwrap().mean_batch(&candidates)?;
            Some(raw.into_iter().map(|f| scale.apply(f)).collect())
        } else {
            None
        };
        let rho = self.rho.unwrap_or(0.0);

        let mut best_idx = 0usize;
        let mut best = f64::INFINITY;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            let x = candidates.row(i);
            let rho_g = g_values.as_ref().map(|g| (rho, g[i]));
            let a = acquisition_with_g(surrogate, lambda, rho_g, x.as_slice().unwrap());
            if a < best {
                best = a;
                best_idx = i;
            }
            if a > worst {
                worst = a;
            }
        }

        if !(worst - best > 1e-15) {
            // Flat acquisition (e.g. no observations yet): nothing to rank,
            // fall back to a uniform random draw.
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(0.0..1.0)).collect();
            return Ok(Proposal { x, lambda, acquisition: best, degenerate: true });
        }

        let mut x = candidates.row(best_idx).to_vec();
        let mut value = best;
        let eval = |pt: &[f64]| -> Result<f64> {
            let rho_g = if use_model {
                let m = Array2::from_shape_vec((1, pt.len()), pt.to_vec()).expect("row reshape");
                let g = scale.apply(predictor.unwrap().mean_batch(&m)?[0]);
                Some((rho, g))
            } else {
                None
            };
            Ok(acquisition_with_g(surrogate, lambda, rho_g, pt))
        };
        let mut radius = 0.1;
        for _ in 0..self.search.refine_steps {
            for j in 0..self.dim {
                let original = x[j];
                let mut best_coord = original;
                for probe in [(original - radius).max(0.0), (original + radius).min(1.0)] {
                    if probe == original {
                        continue;
                    }
                    x[j] = probe;
                    let a = eval(&x)?;
                    if a < value {
                        value = a;
                        best_coord = probe;
                    }
                }
                x[j] = best_coord;
            }
            radius *= 0.95;
        }
        Ok(Proposal { x, lambda, acquisition: value, degenerate: false })
    }
}

/// Stick-breaking map from the hypercube `[0,1]^{n−1}` onto the standard
/// simplex `Δⁿ = {t ∈ Rⁿ : Σ tᵢ = 1, tᵢ ≥ 0}`.
pub fn to_simplex(u: &[f64]) -> Result<Vec<f64>> {
    if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::argument(format!("hypercube point {u:?} outside [0,1]")));
    }
    let mut t = Vec::with_capacity(u.len() + 1);
    let mut remaining = 1.0;
    for &ui in u {
        let piece = remaining * ui;
        t.push(piece);
        remaining -= piece;
    }
    t.push(remaining.max(0.0));
    Ok(t)
}

/// Inverse of [`to_simplex`]. Coordinates past an exhausted stick (remaining
/// mass zero) are mapped to 0, the measure-zero boundary case.
pub fn from_simplex(t: &[f64]) -> Result<Vec<f64>> {
    if t.len() < 2 {
        return Err(Error::argument("simplex point needs at least two coordinates"));
    }
    if t.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(Error::argument(format!("simplex point {t:?} has negative coordinates")));
    }
    let sum: f64 = t.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::argument(format!("simplex point must sum to 1, got {sum}")));
    }
    let mut u = Vec::with_capacity(t.len() - 1);
    let mut remaining = 1.0;
    for &ti in &t[..t.len() - 1] {
        if remaining > 0.0 {
            u.push((ti / remaining).clamp(0.0, 1.0));
        } else {
            u.push(0.0);
        }
        remaining -= ti;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    struct ConstPredictor(f64);
    impl MeanPredictor for ConstPredictor {
        fn mean_batch(&self, xs: &Array2<f64>) -> Result<Vec<f64>> {
            Ok(vec![self.0; xs.nrows()])
        }
    }

    #[test]
    fn hand_evaluated_acquisition() {
        // Single observation (x0, f0=2), bandwidth 0.1, λ=1, ρ=0.5, g=2.
        let x0 = vec![0.4, 0.6];
        let surrogate = KdeSurrogate::new(&[(x0.clone(), 2.0)], 2, 0.1).unwrap();
        let predictor = ConstPredictor(2.0);
        let ctx = AcquisitionContext { lambda: 1.0, rho: Some(0.5), predictor: Some(&predictor) };
        let got = acquisition(&x0, &surrogate, &ctx).unwrap();
        // p_0(x0) = (2π·0.01)^{-1} at zero distance.
        let p0 = 1.0 / (2.0 * std::f64::consts::PI * 0.01);
        let expected = (2.0 * p0 + 1.0 + 0.5 * 2.0) / (p0 + 1.0 + 1.0);
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn reduces_to_base_far_from_observations() {
        // All kernels vanish far away: α → λ/2 when ρ = 0.
        let surrogate = KdeSurrogate::new(&[(vec![0.0, 0.0], 3.0)], 2, 0.02).unwrap();
        for lambda in [1.0, -1.0, 0.3] {
            let ctx = AcquisitionContext { lambda, rho: Some(0.0), predictor: None };
            let a = acquisition(&[1.0, 1.0], &surrogate, &ctx).unwrap();
            assert_abs_diff_eq!(a, lambda / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rho_zero_matches_base_everywhere() {
        let mut rng = rng_from_seed(17);
        let obs: Vec<(Vec<f64>, f64)> = (0..20)
            .map(|_| {
                (
                    vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                    rng.random_range(-3.0..3.0),
                )
            })
            .collect();
        let surrogate = KdeSurrogate::with_annealed_bandwidth(&obs, 2).unwrap();
        let predictor = ConstPredictor(7.7);
        for _ in 0..100 {
            let x = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let base =
                acquisition(&x, &surrogate, &AcquisitionContext { lambda: 1.0, rho: None, predictor: None })
                    .unwrap();
            let gated = acquisition(
                &x,
                &surrogate,
                &AcquisitionContext { lambda: 1.0, rho: Some(0.0), predictor: Some(&predictor) },
            )
            .unwrap();
            assert!((gated - base).abs() < 1e-12);
        }
    }

    #[test]
    fn acquisition_is_monotone_in_rho_for_positive_g() {
        let surrogate = KdeSurrogate::new(&[(vec![0.5], 1.0)], 1, 0.1).unwrap();
        let predictor = ConstPredictor(2.5);
        let x = [0.3];
        let mut last = f64::NEG_INFINITY;
        for rho in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let a = acquisition(
                &x,
                &surrogate,
                &AcquisitionContext { lambda: 1.0, rho: Some(rho), predictor: Some(&predictor) },
            )
            .unwrap();
            assert!(a > last, "α must increase with ρ when g > 0");
            last = a;
        }
    }

    #[test]
    fn bandwidth_schedule_clips() {
        assert_abs_diff_eq!(scott_bandwidth(1, 2), 0.5, epsilon = 1e-15);
        // 0.5·N^(-1/6) for P=2: N=100 → 0.5/100^(1/6) ≈ 0.2320794.
        assert_abs_diff_eq!(scott_bandwidth(100, 2), 0.5 * 100f64.powf(-1.0 / 6.0), epsilon = 1e-12);
        // Enormous N pins to the floor.
        assert_abs_diff_eq!(scott_bandwidth(100_000_000_000, 1), 0.02, epsilon = 1e-15);
    }

    #[test]
    fn empty_observations_give_uniform_random_proposals() {
        let mut planner = Planner::with_default_lambdas(3).unwrap();
        let mut rng = rng_from_seed(1);
        let props = planner.propose(2, None, &mut rng).unwrap();
        assert_eq!(props.len(), 2);
        for p in &props {
            assert!(p.degenerate);
            assert!(p.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // Strategy alternation persists across calls.
        assert_eq!(props[0].lambda, 1.0);
        assert_eq!(props[1].lambda, -1.0);
        let next = planner.propose(1, None, &mut rng).unwrap();
        assert_eq!(next[0].lambda, 1.0);
    }

    #[test]
    fn proposals_are_deterministic_per_seed() {
        let obs = [(vec![0.2, 0.8], 1.0), (vec![0.7, 0.3], -1.0), (vec![0.5, 0.5], 0.2)];
        let run = |seed: u64| {
            let mut planner = Planner::with_default_lambdas(2).unwrap();
            for (x, f) in &obs {
                planner.observe(x.clone(), *f).unwrap();
            }
            planner.propose(4, None, &mut rng_from_seed(seed)).unwrap()
        };
        let a = run(9);
        let b = run(9);
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.x, pb.x);
            assert_eq!(pa.acquisition, pb.acquisition);
        }
        let c = run(10);
        assert!(a.iter().zip(&c).any(|(pa, pc)| pa.x != pc.x));
    }

    #[test]
    fn exploration_strategy_moves_farther_from_high_valued_center() {
        // One high (bad, minimization) observation at the center: λ=−1
        // favours unexplored space, λ=+1 stays relatively closer.
        let dist = |x: &[f64]| ((x[0] - 0.5f64).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
        let mut exploit = Vec::new();
        let mut explore = Vec::new();
        for seed in 0..20u64 {
            let mut planner = Planner::with_default_lambdas(2).unwrap();
            planner.observe(vec![0.5, 0.5], 5.0).unwrap();
            let props = planner.propose(2, None, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(props[0].lambda, 1.0);
            exploit.push(dist(&props[0].x));
            explore.push(dist(&props[1].x));
        }
        let med = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(
            med(&mut explore) >= med(&mut exploit),
            "λ=−1 proposals should sit farther from the observed point"
        );
    }

    #[test]
    fn proposals_prefer_low_objective_regions() {
        let mut planner = Planner::with_default_lambdas(1).unwrap();
        // Low values near x=0.2, high values near x=0.8.
        for (x, f) in [(0.15, 0.2), (0.2, 0.0), (0.25, 0.3), (0.75, 5.0), (0.8, 6.0), (0.85, 5.5)] {
            planner.observe(vec![x], f).unwrap();
        }
        let props = planner.propose(1, None, &mut rng_from_seed(2)).unwrap();
        assert!(props[0].x[0] < 0.5, "exploitation should pull toward the low basin, got {:?}", props[0].x);
    }

    #[test]
    fn negative_rho_pushes_away_from_model_minimum() {
        // Model says the minimum is near 0.9; with ρ < 0 the planner treats
        // the model as anti-correlated and avoids chasing it.
        struct SlopePredictor;
        impl MeanPredictor for SlopePredictor {
            fn mean_batch(&self, xs: &Array2<f64>) -> Result<Vec<f64>> {
                Ok(xs.rows().into_iter().map(|r| 1.0 - r[0]).collect())
            }
        }
        let mut planner = Planner::new(1, vec![1.0]).unwrap();
        for (x, f) in [(0.1, 1.0), (0.5, 1.0), (0.9, 1.0)] {
            planner.observe(vec![x], f).unwrap();
        }
        planner.set_rho(Some(1.0));
        let with_model = planner
            .clone()
            .propose(1, Some(&SlopePredictor), &mut rng_from_seed(3))
            .unwrap();
        planner.set_rho(Some(-1.0));
        let against_model = planner.propose(1, Some(&SlopePredictor), &mut rng_from_seed(3)).unwrap();
        // Positive ρ chases the predicted minimum (x→1); negative ρ flees it.
        assert!(with_model[0].x[0] > against_model[0].x[0]);
    }

    #[test]
    fn simplex_vertices_and_validation() {
        let t = to_simplex(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t, vec![0.0, 0.0, 0.0, 1.0]);
        let t = to_simplex(&[1.0, 0.3, 0.9]).unwrap();
        assert_abs_diff_eq!(t.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(t[0], 1.0);
        assert!(from_simplex(&[0.5, 0.2]).is_err()); // sums to 0.7
        assert!(from_simplex(&[1.5, -0.5]).is_err()); // negative coordinate
    }

    proptest! {
        #[test]
        fn simplex_round_trip(u in proptest::collection::vec(0.0f64..1.0, 1..6)) {
            let t = to_simplex(&u).unwrap();
            prop_assert!(t.iter().all(|v| *v >= 0.0));
            prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let back = from_simplex(&t).unwrap();
            for (a, b) in u.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }
}
