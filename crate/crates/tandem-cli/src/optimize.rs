//! `optimize`: run a suite of closed-loop campaigns and write traces plus
//! summary tables.
//!
//! Outputs in the target directory:
//! - `{label}_rep{j:03}.jsonl` — per-iteration trace of each campaign,
//! - `manifest.json` — entry metadata and the expected trace files,
//! - `suite.csv` — per-strategy summary with Wilcoxon p-values,
//! - `boxplot.csv` — five-number summaries of evaluations-to-target.

use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tandem::campaign::{
    run_suite_records, summarize_counts, CampaignConfig, EntryMeta, SuiteEntry, SuiteSummary,
};
use tandem::data::Fidelity;

use crate::config::{OptimizeConfig, TargetSpec};

/// Sidecar describing a finished suite; `report` rebuilds summaries from
/// this plus the trace files, without re-running anything.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub repeats: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub meta: EntryMeta,
    /// Trace files, one per repeat, in repeat order.
    pub files: Vec<String>,
}

/// Nearest-rank percentile of the expensive surface over a reference grid.
fn percentile_target(config: &OptimizeConfig, q: f64, grid: usize) -> Result<f64> {
    let mut probe = config.expensive.build(Fidelity::Expensive)?;
    let dim = probe.dim();
    let n: usize = grid.pow(dim as u32);
    if n > 4_000_000 {
        anyhow::bail!("percentile grid {grid}^{dim} is too large");
    }
    let mut values = Vec::with_capacity(n);
    let mut x = vec![0.0; dim];
    for flat in 0..n {
        let mut rem = flat;
        for d in (0..dim).rev() {
            x[d] = (rem % grid) as f64 / (grid - 1) as f64;
            rem /= grid;
        }
        values.push(probe.eval(&x)?);
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(values[rank - 1])
}

pub fn run(config: &OptimizeConfig, out: &Path) -> Result<(f64, SuiteSummary)> {
    config.validate()?;
    let target = match config.target {
        TargetSpec::Value { value } => value,
        TargetSpec::Percentile { q, grid } => percentile_target(config, q, grid)?,
    };

    let hyper = config.hyper.apply();
    let mut entries = Vec::new();
    for spec in &config.strategies {
        let campaign = CampaignConfig {
            strategy: spec.strategy,
            cheap_per_expensive: spec.cheap_per_expensive,
            target,
            max_expensive: config.max_expensive,
            seed: config.seed,
            hyper: hyper.clone(),
            rho_folds: config.rho_folds,
        };
        let cheap = match &config.cheap {
            Some(spec) => Some(spec.build(Fidelity::Cheap)?),
            None => None,
        };
        entries.push(SuiteEntry {
            label: spec.label(),
            config: campaign,
            expensive: config.expensive.build(Fidelity::Expensive)?,
            cheap,
        });
    }

    let records = run_suite_records(&entries, config.repeats)?;

    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let mut manifest = SuiteManifest { repeats: config.repeats, entries: Vec::new() };
    for (entry, runs) in entries.iter().zip(&records) {
        let mut files = Vec::with_capacity(runs.len());
        for (j, record) in runs.iter().enumerate() {
            let name = format!("{}_rep{j:03}.jsonl", entry.label);
            let file = std::fs::File::create(out.join(&name))
                .with_context(|| format!("cannot create {name}"))?;
            record.write_jsonl(std::io::BufWriter::new(file))?;
            files.push(name);
        }
        manifest.entries.push(ManifestEntry { meta: entry.meta(), files });
    }
    let mf = std::fs::File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(mf), &manifest)?;

    let meta: Vec<EntryMeta> = entries.iter().map(SuiteEntry::meta).collect();
    let counts: Vec<Vec<usize>> = meta
        .iter()
        .zip(&records)
        .map(|(m, rs)| rs.iter().map(|r| r.evals_to_target(m.max_expensive)).collect())
        .collect();
    let summary = summarize_counts(&meta, counts)?;
    write_tables(&summary, out)?;

    println!(
        "target {target:.6}; {} strategies x {} repeats -> {}",
        entries.len(),
        config.repeats,
        out.display()
    );
    Ok((target, summary))
}

/// Writes `suite.csv` and `boxplot.csv`; shared by `optimize` and `report`
/// so both produce identical tables from the same counts.
pub fn write_tables(summary: &SuiteSummary, out: &Path) -> Result<()> {
    let path = out.join("suite.csv");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    summary.write_csv(&mut w)?;
    w.flush()?;

    let path = out.join("boxplot.csv");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "strategy,min,q1,median,q3,max")?;
    for (row, counts) in summary.rows.iter().zip(&summary.counts) {
        let lo = counts.iter().min().expect("nonempty by construction");
        let hi = counts.iter().max().expect("nonempty by construction");
        writeln!(
            w,
            "{},{lo},{},{},{},{hi}",
            row.strategy, row.q1, row.median, row.q3
        )?;
    }
    w.flush()?;
    Ok(())
}
