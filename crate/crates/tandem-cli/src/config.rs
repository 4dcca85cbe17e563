//! Run configurations for the subcommands.
//!
//! Each command takes one JSON file. Configs are strict: unknown keys are
//! rejected so a typo fails fast instead of silently running defaults, and
//! everything is validated before any compute starts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tandem::campaign::{Evaluator, Strategy, SurfaceKind};
use tandem::data::Fidelity;
use tandem::surface::{AnalyticSurface, SurfacePair, TrigPairKind, BIN_ATTEMPT_CAP};
use tandem::Hyperparams;

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Overrides applied on top of [`Hyperparams::default`]. Only the knobs
/// that commonly need adjusting per run are exposed; everything else keeps
/// its default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperOverride {
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub coeff_both: Option<f64>,
}

impl HyperOverride {
    pub fn apply(&self) -> Hyperparams {
        let mut h = Hyperparams::default();
        if let Some(v) = self.max_epochs {
            h.max_epochs = v;
        }
        if let Some(v) = self.patience {
            h.patience = v;
        }
        if let Some(v) = self.batch_size {
            h.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            h.learning_rate = v;
        }
        if let Some(v) = self.coeff_both {
            h.coeff_both = v;
        }
        h
    }
}

/// Config for `gen-surfaces`: sample GP surface pairs binned by rank
/// correlation and write one CSV + JSON sidecar per accepted pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSurfacesConfig {
    pub seed: u64,
    /// Grid points per axis.
    pub grid: usize,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    #[serde(default = "one_f")]
    pub variance: f64,
    /// Anchor points of each GP surface draw.
    pub n_anchors: usize,
    pub pairs_per_bin: usize,
    /// Bin indices (0..8 from rank correlation −1..1); all bins if omitted.
    #[serde(default)]
    pub bins: Option<Vec<usize>>,
    /// Rejection-sampling cap per pair before the bin is declared
    /// unreachable and skipped with a warning.
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

/// Config for `regress`: learning curves of the twin model against the
/// single-fidelity baselines over repeated random splits.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    pub seed: u64,
    pub source: DataSource,
    /// Expensive training-set sizes.
    pub sizes: Vec<usize>,
    /// Cheap observations per expensive one (capped at the pool size).
    #[serde(default = "ten")]
    pub cheap_ratio: usize,
    /// Random train/validation splits per size.
    #[serde(default = "forty")]
    pub splits: usize,
    #[serde(default)]
    pub hyper: HyperOverride,
}

/// Where regression data comes from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Descriptor CSV: `id, f1..fP, y_cheap, y_exp` with empty cells for a
    /// missing fidelity.
    Csv { path: PathBuf },
    /// Closed-form trigonometric pair sampled on a uniform grid.
    Trig { pair: TrigPairKind, grid: usize },
    /// A stored surface pair (e.g. from `gen-surfaces`).
    Pair { csv: PathBuf, meta: PathBuf },
}

/// Config for `optimize`: a suite of closed-loop campaigns over one
/// surface, one entry per strategy, paired across repeats.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub seed: u64,
    /// Paired repeats per strategy (each repeat reuses the same derived
    /// seed across strategies).
    pub repeats: usize,
    pub max_expensive: usize,
    pub expensive: EvaluatorSpec,
    #[serde(default)]
    pub cheap: Option<EvaluatorSpec>,
    pub target: TargetSpec,
    pub strategies: Vec<StrategySpec>,
    #[serde(default = "three")]
    pub rho_folds: usize,
    #[serde(default)]
    pub hyper: HyperOverride,
}

/// One evaluator: a surface plus the cost charged per call.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorSpec {
    pub surface: SurfaceSpec,
    #[serde(default = "one_f")]
    pub cost: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    /// Closed-form benchmark surface on the unit hypercube.
    Analytic { surface: AnalyticSurface, dim: usize },
    /// One branch of a trigonometric pair; the branch follows the
    /// evaluator's role (cheap or expensive).
    Trig { pair: TrigPairKind },
    /// Nearest-neighbor lookup into a stored surface pair.
    Pair { csv: PathBuf, meta: PathBuf },
}

impl EvaluatorSpec {
    pub fn build(&self, fidelity: Fidelity) -> Result<Evaluator> {
        let ev = match &self.surface {
            SurfaceSpec::Analytic { surface, dim } => Evaluator::new(
                SurfaceKind::Analytic { surface: *surface, dim: *dim },
                fidelity,
                self.cost,
            ),
            SurfaceSpec::Trig { pair } => {
                Evaluator::new(SurfaceKind::Trig { pair: *pair, fidelity }, fidelity, self.cost)
            }
            SurfaceSpec::Pair { csv, meta } => {
                let pair = SurfacePair::load(csv, meta)
                    .with_context(|| format!("cannot load surface pair {}", csv.display()))?;
                Evaluator::from_pair(&pair, fidelity, self.cost)
            }
        };
        Ok(ev?)
    }
}

/// Stopping target for a campaign.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Stop when a measured expensive value is at or below this.
    Value { value: f64 },
    /// Stop at the q-th percentile (nearest rank) of the expensive surface
    /// evaluated on a `grid`-per-axis reference lattice.
    Percentile { q: f64, grid: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub strategy: Strategy,
    #[serde(default)]
    pub cheap_per_expensive: usize,
    /// Row label; defaults to the strategy name, with `_r{n}` appended for
    /// the twin-guided strategy.
    #[serde(default)]
    pub label: Option<String>,
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match (&self.label, self.strategy) {
            (Some(l), _) => l.clone(),
            (None, Strategy::BoTwin) => {
                format!("{}_r{}", self.strategy.name(), self.cheap_per_expensive)
            }
            (None, s) => s.name().to_string(),
        }
    }
}

impl GenSurfacesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            bail!("grid must have at least 2 points per axis");
        }
        if self.dim == 0 {
            bail!("dim must be positive");
        }
        if !(self.length_scale > 0.0) || !(self.variance > 0.0) {
            bail!("length_scale and variance must be positive");
        }
        if self.n_anchors == 0 {
            bail!("n_anchors must be positive");
        }
        if self.pairs_per_bin == 0 {
            bail!("pairs_per_bin must be positive");
        }
        if self.max_attempts == 0 {
            bail!("max_attempts must be positive");
        }
        if let Some(bins) = &self.bins {
            if bins.is_empty() {
                bail!("bins, when given, must not be empty");
            }
            if let Some(b) = bins.iter().find(|&&b| b >= 8) {
                bail!("bin index {b} outside 0..8");
            }
        }
        Ok(())
    }
}

impl RegressConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            bail!("sizes must not be empty");
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s < 2) {
            bail!("training size {s} too small; need at least 2 expensive points");
        }
        if self.splits == 0 {
            bail!("splits must be positive");
        }
        if let DataSource::Trig { grid, .. } = &self.source {
            if *grid < 3 {
                bail!("trig grid must have at least 3 points");
            }
        }
        Ok(())
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            bail!("strategies must not be empty");
        }
        if self.repeats < 2 {
            bail!("repeats must be at least 2 for paired comparisons");
        }
        if self.max_expensive == 0 {
            bail!("max_expensive must be positive");
        }
        if self.rho_folds < 2 {
            bail!("rho_folds must be at least 2");
        }
        if let TargetSpec::Percentile { q, grid } = self.target {
            if !(0.0..=100.0).contains(&q) {
                bail!("percentile q={q} outside 0..=100");
            }
            if grid < 2 {
                bail!("percentile grid must have at least 2 points per axis");
            }
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.strategies {
            if !seen.insert(s.label()) {
                bail!("duplicate strategy label {:?}", s.label());
            }
            if s.strategy == Strategy::BoTwin {
                if s.cheap_per_expensive == 0 {
                    bail!("bo_twin needs cheap_per_expensive >= 1");
                }
                if self.cheap.is_none() {
                    bail!("bo_twin needs a cheap evaluator");
                }
            }
        }
        Ok(())
    }
}

fn one() -> usize {
    1
}
fn three() -> usize {
    3
}
fn ten() -> usize {
    10
}
fn forty() -> usize {
    40
}
fn one_f() -> f64 {
    1.0
}
fn default_length_scale() -> f64 {
    0.1
}
fn default_attempts() -> usize {
    BIN_ATTEMPT_CAP
}
