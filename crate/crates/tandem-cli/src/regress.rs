//! `regress`: learning curves over repeated random splits.
//!
//! For every expensive training-set size, the data is split `splits` times
//! into training and validation rows; on each split the twin model and the
//! three single-fidelity baselines (expensive-only, cheap-only, pooled)
//! are trained and scored against the held-out expensive values. The
//! report lists RMSD, R² and Pearson quartiles per size and model.

use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use tandem::data::Dataset;
use tandem::rng::{child_rng, subseed};
use tandem::stats::{pearson, r_squared, rmsd, summarize};
use tandem::surface::SurfacePair;
use tandem::twin::{baseline_train, BaselineKind, TwinModel};

use crate::config::{DataSource, RegressConfig};
use crate::dataset::DescriptorDataset;

const MODELS: [&str; 4] = ["twin", "nn_exp", "nn_cheap", "nn_both"];

/// In-memory dual-fidelity pool; `y_cheap`/`y_exp` are per-row optionals.
struct Pool {
    xs: Vec<Vec<f64>>,
    y_cheap: Vec<Option<f64>>,
    y_exp: Vec<Option<f64>>,
}

impl Pool {
    fn from_source(source: &DataSource) -> Result<Self> {
        match source {
            DataSource::Csv { path } => {
                let ds = DescriptorDataset::read_csv(path)?;
                println!(
                    "loaded {} rows with {} features from {}",
                    ds.rows().len(),
                    ds.width(),
                    path.display()
                );
                Ok(Pool {
                    xs: ds.rows().iter().map(|r| r.features.clone()).collect(),
                    y_cheap: ds.rows().iter().map(|r| r.y_cheap).collect(),
                    y_exp: ds.rows().iter().map(|r| r.y_exp).collect(),
                })
            }
            DataSource::Trig { pair, grid } => {
                let xs: Vec<f64> =
                    (0..*grid).map(|i| i as f64 / (*grid - 1) as f64).collect();
                Ok(Pool {
                    xs: xs.iter().map(|&x| vec![x]).collect(),
                    y_cheap: xs.iter().map(|&x| Some(pair.cheap(x))).collect(),
                    y_exp: xs.iter().map(|&x| Some(pair.expensive(x))).collect(),
                })
            }
            DataSource::Pair { csv, meta } => {
                let pair = SurfacePair::load(csv, meta)
                    .with_context(|| format!("cannot load surface pair {}", csv.display()))?;
                let xs = pair
                    .domain
                    .points()
                    .rows()
                    .into_iter()
                    .map(|r| r.to_vec())
                    .collect();
                Ok(Pool {
                    xs,
                    y_cheap: pair.y_cheap.iter().map(|&y| Some(y)).collect(),
                    y_exp: pair.y_exp.iter().map(|&y| Some(y)).collect(),
                })
            }
        }
    }

    fn dim(&self) -> usize {
        self.xs[0].len()
    }
}

/// RMSD, R², Pearson of one model on one split's validation rows.
type Scores = [f64; 3];

fn score(pred: &[f64], truth: &[f64]) -> Scores {
    [
        rmsd(pred, truth),
        r_squared(pred, truth).unwrap_or(f64::NAN),
        pearson(pred, truth).unwrap_or(f64::NAN),
    ]
}

fn run_split(
    pool: &Pool,
    exp_pool: &[usize],
    cheap_pool: &[usize],
    size: usize,
    n_cheap: usize,
    job_seed: u64,
    config: &RegressConfig,
) -> Result<[Scores; 4]> {
    let mut rng = child_rng(job_seed, 9);
    let exp_train: Vec<usize> = rand::seq::index::sample(&mut rng, exp_pool.len(), size)
        .iter()
        .map(|i| exp_pool[i])
        .collect();
    let cheap_train: Vec<usize> = rand::seq::index::sample(&mut rng, cheap_pool.len(), n_cheap)
        .iter()
        .map(|i| cheap_pool[i])
        .collect();

    let mut ds = Dataset::new(pool.dim());
    for &i in &cheap_train {
        ds.push_cheap(pool.xs[i].clone(), pool.y_cheap[i].unwrap())?;
    }
    for &i in &exp_train {
        ds.push_expensive(pool.xs[i].clone(), pool.y_exp[i].unwrap())?;
    }

    let validation: Vec<usize> =
        exp_pool.iter().copied().filter(|i| !exp_train.contains(i)).collect();
    if validation.is_empty() {
        bail!("degenerate split: no expensive rows left for validation at size {size}");
    }
    let mut xv = ndarray::Array2::zeros((validation.len(), pool.dim()));
    let mut yv = Vec::with_capacity(validation.len());
    for (r, &i) in validation.iter().enumerate() {
        for (c, &x) in pool.xs[i].iter().enumerate() {
            xv[[r, c]] = x;
        }
        yv.push(pool.y_exp[i].unwrap());
    }

    let hyper = config.hyper.apply();
    let mut twin = TwinModel::new(pool.dim(), hyper.clone(), &mut child_rng(job_seed, 1))?;
    twin.train(&ds, job_seed)?;
    let twin_pred: Vec<f64> =
        twin.predict_expensive(&xv)?.iter().map(|p| p.mean).collect();

    let mut out = [[0.0; 3]; 4];
    out[0] = score(&twin_pred, &yv);
    for (bi, kind) in
        [BaselineKind::NnExp, BaselineKind::NnCheap, BaselineKind::NnBoth].iter().enumerate()
    {
        let model = baseline_train(*kind, &ds, &hyper, subseed(job_seed, 2 + bi as u64))?;
        let pred: Vec<f64> = model.predict(&xv)?.iter().map(|p| p.mean).collect();
        out[bi + 1] = score(&pred, &yv);
    }
    Ok(out)
}

pub fn run(config: &RegressConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let pool = Pool::from_source(&config.source)?;
    let exp_pool: Vec<usize> =
        (0..pool.xs.len()).filter(|&i| pool.y_exp[i].is_some()).collect();
    let cheap_pool: Vec<usize> =
        (0..pool.xs.len()).filter(|&i| pool.y_cheap[i].is_some()).collect();
    if cheap_pool.is_empty() {
        bail!("no rows carry a cheap label");
    }
    for &size in &config.sizes {
        if size >= exp_pool.len() {
            bail!(
                "size {size} needs validation rows beyond the {} expensive rows available",
                exp_pool.len()
            );
        }
    }

    let jobs: Vec<(usize, usize)> = (0..config.sizes.len())
        .flat_map(|si| (0..config.splits).map(move |k| (si, k)))
        .collect();
    let results: Vec<Result<[Scores; 4]>> = jobs
        .par_iter()
        .map(|&(si, k)| {
            let size = config.sizes[si];
            let n_cheap = (config.cheap_ratio * size).min(cheap_pool.len());
            let job_seed = subseed(config.seed, (si * config.splits + k) as u64);
            run_split(&pool, &exp_pool, &cheap_pool, size, n_cheap, job_seed, config)
        })
        .collect();

    for &size in &config.sizes {
        let want = config.cheap_ratio * size;
        if want > cheap_pool.len() {
            eprintln!(
                "note: size {size} asked for {want} cheap rows; capped at the pool of {}",
                cheap_pool.len()
            );
        }
    }

    // results arrive in job order: group by (size, model) across splits.
    let mut per_cell: Vec<Vec<Scores>> =
        vec![Vec::with_capacity(config.splits); config.sizes.len() * MODELS.len()];
    for (&(si, _), res) in jobs.iter().zip(results) {
        let scores = res?;
        for (mi, s) in scores.iter().enumerate() {
            per_cell[si * MODELS.len() + mi].push(*s);
        }
    }

    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let path = out.join("learning_curve.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(
        w,
        "size,model,splits,rmsd_q1,rmsd_median,rmsd_q3,\
         r2_q1,r2_median,r2_q3,pearson_q1,pearson_median,pearson_q3"
    )?;
    for (si, &size) in config.sizes.iter().enumerate() {
        for (mi, model) in MODELS.iter().enumerate() {
            let cell = &per_cell[si * MODELS.len() + mi];
            let mut quartiles = Vec::new();
            for metric in 0..3 {
                let vals: Vec<f64> = cell.iter().map(|s| s[metric]).collect();
                let s = summarize(&vals)
                    .ok_or_else(|| anyhow::anyhow!("no splits produced scores"))?;
                quartiles.extend([s.q1, s.median, s.q3]);
            }
            let cols: Vec<String> = quartiles.iter().map(|q| format!("{q:.6}")).collect();
            writeln!(w, "{size},{model},{},{}", cell.len(), cols.join(","))?;
        }
    }
    w.flush()?;
    println!(
        "wrote {} rows ({} sizes x {} models over {} splits) to {}",
        config.sizes.len() * MODELS.len(),
        config.sizes.len(),
        MODELS.len(),
        config.splits,
        path.display()
    );
    Ok(())
}
