//! Synthetic surface laboratory.
//!
//! Produces paired cheap/expensive response surfaces over finite evaluation
//! domains: Gaussian-process draws whose rank correlation is steered into
//! bins, closed-form trigonometric pairs with known bias structure, and
//! classic analytic benchmark surfaces. Pairs serialize to a CSV of domain
//! values plus a JSON sidecar describing where they came from.

pub mod analytic;
pub mod gp;
pub mod linalg;
pub mod trig;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::child_rng;
use crate::stats::spearman;

pub use analytic::{analytic_pair, AnalyticSurface};
pub use gp::{gp_posterior, gp_prior_sample, gp_surface_sample, GpPosterior, RbfKernel};
pub use trig::{trig_surface_pair, trig_training_set, TrigPairKind};

/// Finite evaluation domain: an evenly spaced tensor grid over `[lo, hi]`
/// on every axis, flattened row-major (first axis slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lo: f64,
    hi: f64,
    shape: Vec<usize>,
}

impl Domain {
    pub fn grid(lo: f64, hi: f64, shape: &[usize]) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::argument(format!("domain bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if shape.is_empty() {
            return Err(Error::argument("domain needs at least one axis"));
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::argument("every domain axis needs at least two points"));
        }
        Ok(Self { lo, hi, shape: shape.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Evenly spaced coordinates along one axis, endpoints included.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let n = self.shape[axis];
        let step = (self.hi - self.lo) / (n - 1) as f64;
        (0..n).map(|i| self.lo + step * i as f64).collect()
    }

    /// All domain points as a `(len, dim)` matrix in row-major grid order.
    pub fn points(&self) -> Array2<f64> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_coords(a)).collect();
        let mut pts = Array2::<f64>::zeros((self.len(), self.dim()));
        for (flat, mut row) in pts.rows_mut().into_iter().enumerate() {
            let mut rem = flat;
            for axis in (0..self.dim()).rev() {
                let n = self.shape[axis];
                row[axis] = axes[axis][rem % n];
                rem /= n;
            }
        }
        pts
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            x[axis] = self.axis_coords(axis)[rem % n];
            rem /= n;
        }
        x
    }
}

/// Where a surface pair came from; stored verbatim in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PairProvenance {
    Gp { seed: u64, n_anchors: usize, kernel: RbfKernel },
    Trig { pair: String },
    Analytic { cheap: String, expensive: String },
}

/// A cheap and an expensive response surface over one shared domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePair {
    pub domain: Domain,
    pub y_cheap: Vec<f64>,
    pub y_exp: Vec<f64>,
    /// Spearman rank correlation between the two surfaces over the domain.
    pub spearman: f64,
    pub provenance: PairProvenance,
}

impl SurfacePair {
    pub fn from_values(
        domain: Domain,
        y_cheap: Vec<f64>,
        y_exp: Vec<f64>,
        provenance: PairProvenance,
    ) -> Result<Self> {
        if y_cheap.len() != domain.len() || y_exp.len() != domain.len() {
            return Err(Error::Shape {
                expected: format!("{} surface values per fidelity", domain.len()),
                actual: format!("cheap {}, expensive {}", y_cheap.len(), y_exp.len()),
            });
        }
        if y_cheap.iter().chain(y_exp.iter()).any(|v| !v.is_finite()) {
            return Err(Error::argument("surface values must be finite"));
        }
        let spearman = spearman(&y_cheap, &y_exp)
            .ok_or_else(|| Error::state("surface pair is rank-degenerate (a constant surface)"))?;
        Ok(Self { domain, y_cheap, y_exp, spearman, provenance })
    }

    /// Builds the training set for one fold: cheap observations at the
    /// fold's cheap indices plus expensive observations at its expensive
    /// indices, both in ascending domain order.
    pub fn fold_train_set(&self, fold: &Fold) -> Result<Dataset> {
        let mut ds = Dataset::new(self.domain.dim());
        for &i in &fold.cheap_idx {
            ds.push_cheap(self.domain.point(i), self.y_cheap[i])?;
        }
        for &i in &fold.exp_idx {
            ds.push_expensive(self.domain.point(i), self.y_exp[i])?;
        }
        Ok(ds)
    }

    /// Validation set for one fold: every expensive-surface point that the
    /// fold did not observe at the expensive fidelity.
    pub fn fold_validation_set(&self, fold: &Fold) -> Result<Dataset> {
        let mut ds = Dataset::new(self.domain.dim());
        for &i in &fold.validation_idx {
            ds.push_expensive(self.domain.point(i), self.y_exp[i])?;
        }
        Ok(ds)
    }

    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(csv_path)?);
        let dim = self.domain.dim();
        let header: Vec<String> = (1..=dim)
            .map(|i| format!("x{i}"))
            .chain(["y_cheap".into(), "y_exp".into()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        let pts = self.domain.points();
        for i in 0..self.domain.len() {
            for j in 0..dim {
                write!(w, "{:.17e},", pts[(i, j)])?;
            }
            writeln!(w, "{:.17e},{:.17e}", self.y_cheap[i], self.y_exp[i])?;
        }
        w.flush()?;

        let meta = PairMeta {
            schema: PAIR_SCHEMA.to_string(),
            domain: self.domain.clone(),
            spearman: self.spearman,
            provenance: self.provenance.clone(),
        };
        let mut mw = BufWriter::new(fs::File::create(meta_path)?);
        serde_json::to_writer_pretty(&mut mw, &meta)?;
        mw.write_all(b"\n")?;
        mw.flush()?;
        Ok(())
    }

    pub fn load(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta: PairMeta = serde_json::from_reader(fs::File::open(meta_path)?)?;
        if meta.schema != PAIR_SCHEMA {
            return Err(Error::argument(format!(
                "unsupported surface schema {:?} in {}",
                meta.schema,
                meta_path.display()
            )));
        }
        let domain = meta.domain;
        let dim = domain.dim();
        let reader = BufReader::new(fs::File::open(csv_path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::argument(format!("{} is empty", csv_path.display())))??;
        let expected_header: Vec<String> = (1..=dim)
            .map(|i| format!("x{i}"))
            .chain(["y_cheap".into(), "y_exp".into()])
            .collect();
        if header.trim() != expected_header.join(",") {
            return Err(Error::argument(format!("unexpected surface CSV header {header:?}")));
        }
        let pts = domain.points();
        let mut y_cheap = Vec::with_capacity(domain.len());
        let mut y_exp = Vec::with_capacity(domain.len());
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 2 {
                return Err(Error::argument(format!(
                    "surface CSV row {} has {} fields, expected {}",
                    i + 2,
                    fields.len(),
                    dim + 2
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::argument(format!("bad number {s:?}: {e}")))
            };
            for j in 0..dim {
                let x = parse(fields[j])?;
                if i >= domain.len() || x != pts[(i, j)] {
                    return Err(Error::state(format!(
                        "surface CSV row {} does not match the domain grid in the sidecar",
                        i + 2
                    )));
                }
            }
            y_cheap.push(parse(fields[dim])?);
            y_exp.push(parse(fields[dim + 1])?);
        }
        let pair = Self::from_values(domain, y_cheap, y_exp, meta.provenance)?;
        if (pair.spearman - meta.spearman).abs() > 1e-9 {
            return Err(Error::state(format!(
                "sidecar records spearman {} but the surface data gives {}",
                meta.spearman, pair.spearman
            )));
        }
        Ok(pair)
    }
}

const PAIR_SCHEMA: &str = "tandem-surface-pair/1";

#[derive(Debug, Serialize, Deserialize)]
struct PairMeta {
    schema: String,
    domain: Domain,
    spearman: f64,
    provenance: PairProvenance,
}

/// Number of Spearman bins covering `[-1, 1]`.
pub const SPEARMAN_BINS: usize = 8;
/// Width of each Spearman bin.
pub const SPEARMAN_BIN_WIDTH: f64 = 0.25;

/// Maps a rank correlation to its bin index; values on a bin boundary fall
/// in the lower bin, and anything outside `[-1, 1]` is clamped.
pub fn spearman_bin(r: f64) -> usize {
    let raw = ((r + 1.0) / SPEARMAN_BIN_WIDTH).ceil() as isize - 1;
    raw.clamp(0, SPEARMAN_BINS as isize - 1) as usize
}

/// Inclusive-bounds interval covered by a bin.
pub fn spearman_bin_bounds(bin: usize) -> (f64, f64) {
    let lo = -1.0 + SPEARMAN_BIN_WIDTH * bin as f64;
    (lo, lo + SPEARMAN_BIN_WIDTH)
}

/// Draws a fresh GP surface pair; the two surfaces are independent draws.
pub fn gp_sample_pair(
    kernel: &RbfKernel,
    domain: &Domain,
    n_anchors: usize,
    seed: u64,
) -> Result<SurfacePair> {
    let y_exp = gp_surface_sample(kernel, domain, n_anchors, &mut child_rng(seed, 0))?;
    let y_cheap = gp_surface_sample(kernel, domain, n_anchors, &mut child_rng(seed, 1))?;
    SurfacePair::from_values(
        domain.clone(),
        y_cheap.to_vec(),
        y_exp.to_vec(),
        PairProvenance::Gp { seed, n_anchors, kernel: *kernel },
    )
}

/// Default cap on rejection attempts when steering a pair into a bin.
pub const BIN_ATTEMPT_CAP: usize = 500;

/// Repeatedly draws cheap surfaces against a fixed expensive surface until
/// the pair's rank correlation lands in `target_bin`.
///
/// Returns the accepted cheap surface and its Spearman coefficient, or
/// [`Error::BinUnreachable`] once `max_attempts` draws have all missed.
pub fn gp_cheap_surface_in_bin(
    kernel: &RbfKernel,
    domain: &Domain,
    n_anchors: usize,
    y_exp: &[f64],
    target_bin: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(Vec<f64>, f64)> {
    if target_bin >= SPEARMAN_BINS {
        return Err(Error::argument(format!("bin index {target_bin} outside 0..{SPEARMAN_BINS}")));
    }
    if y_exp.len() != domain.len() {
        return Err(Error::Shape {
            expected: format!("expensive surface of length {}", domain.len()),
            actual: format!("{}", y_exp.len()),
        });
    }
    for attempt in 0..max_attempts {
        let draw = gp_surface_sample(kernel, domain, n_anchors, &mut child_rng(seed, attempt as u64))?;
        let cheap = draw.to_vec();
        if let Some(r) = spearman(&cheap, y_exp) {
            if spearman_bin(r) == target_bin {
                return Ok((cheap, r));
            }
        }
    }
    Err(Error::BinUnreachable { bin: target_bin, attempts: max_attempts })
}

/// Train/validation split of one surface pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    /// Domain indices observed at the cheap fidelity.
    pub cheap_idx: Vec<usize>,
    /// Domain indices observed at the expensive fidelity.
    pub exp_idx: Vec<usize>,
    /// Expensive-surface domain indices left unobserved — the validation targets.
    pub validation_idx: Vec<usize>,
}

/// Default number of folds per surface pair.
pub const DEFAULT_FOLDS: usize = 20;

/// Splits a domain into `n_folds` independent train/validation folds. Each
/// fold samples `n_cheap` cheap and `n_exp` expensive observation indices
/// uniformly without replacement; the expensive points not drawn form the
/// fold's validation targets.
pub fn make_folds(
    domain_len: usize,
    n_cheap: usize,
    n_exp: usize,
    n_folds: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    if n_folds == 0 {
        return Err(Error::argument("fold count must be positive"));
    }
    if n_cheap > domain_len {
        return Err(Error::argument(format!(
            "cannot sample {n_cheap} cheap points from a domain of {domain_len}"
        )));
    }
    if n_exp >= domain_len {
        return Err(Error::argument(format!(
            "need {n_exp} expensive points but only {domain_len} domain points; no validation targets would remain"
        )));
    }
    let mut folds = Vec::with_capacity(n_folds);
    for fi in 0..n_folds {
        let mut rng = child_rng(seed, fi as u64);
        let mut cheap_idx = rand::seq::index::sample(&mut rng, domain_len, n_cheap).into_vec();
        let mut exp_idx = rand::seq::index::sample(&mut rng, domain_len, n_exp).into_vec();
        cheap_idx.sort_unstable();
        exp_idx.sort_unstable();
        let mut observed = vec![false; domain_len];
        for &i in &exp_idx {
            observed[i] = true;
        }
        let validation_idx: Vec<usize> = (0..domain_len).filter(|&i| !observed[i]).collect();
        folds.push(Fold { cheap_idx, exp_idx, validation_idx });
    }
    Ok(folds)
}
