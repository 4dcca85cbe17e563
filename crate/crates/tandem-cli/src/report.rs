//! `report`: rebuild the suite summary tables from recorded traces.
//!
//! Reads `manifest.json` plus the trace files it lists and regenerates
//! `suite.csv` and `boxplot.csv` through the same code paths `optimize`
//! uses, so re-running a report is idempotent and a freshly reported
//! directory matches what the original run wrote.

use std::path::Path;

use anyhow::{bail, Context, Result};
use tandem::campaign::{summarize_counts, CampaignStatus, EntryMeta, RecordTail};

use crate::optimize::{write_tables, SuiteManifest};

fn read_tail(path: &Path) -> Result<RecordTail> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read trace {}", path.display()))?;
    let last = text
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .with_context(|| format!("trace {} is empty", path.display()))?;
    serde_json::from_str(last)
        .with_context(|| format!("trace {} has a malformed tail line", path.display()))
}

pub fn run(dir: &Path, out: &Path) -> Result<()> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .with_context(|| format!("cannot read {}", manifest_path.display()))?;
    let manifest: SuiteManifest = serde_json::from_str(&text)
        .with_context(|| format!("invalid manifest {}", manifest_path.display()))?;
    if manifest.entries.is_empty() {
        bail!("manifest lists no suite entries");
    }

    let mut missing = Vec::new();
    let mut meta: Vec<EntryMeta> = Vec::new();
    let mut counts: Vec<Vec<usize>> = Vec::new();
    for entry in &manifest.entries {
        if entry.files.len() != manifest.repeats {
            bail!(
                "entry {} lists {} trace files but the suite has {} repeats",
                entry.meta.label,
                entry.files.len(),
                manifest.repeats
            );
        }
        let mut entry_counts = Vec::with_capacity(entry.files.len());
        for (j, name) in entry.files.iter().enumerate() {
            let path = dir.join(name);
            if !path.is_file() {
                missing.push(format!("{} repeat {j} ({name})", entry.meta.label));
                continue;
            }
            let tail = read_tail(&path)?;
            if let CampaignStatus::Aborted { detail } = &tail.status {
                bail!("{} repeat {j} aborted: {detail}", entry.meta.label);
            }
            entry_counts.push(tail.evals_to_target(entry.meta.max_expensive));
        }
        meta.push(entry.meta.clone());
        counts.push(entry_counts);
    }
    if !missing.is_empty() {
        bail!("missing campaign traces: {}", missing.join(", "));
    }

    let summary = summarize_counts(&meta, counts)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    write_tables(&summary, out)?;
    println!("rebuilt summary tables for {} entries in {}", meta.len(), out.display());
    Ok(())
}
