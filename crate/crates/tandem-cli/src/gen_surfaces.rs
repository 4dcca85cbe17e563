//! `gen-surfaces`: sample GP surface pairs whose rank correlation lands in
//! requested bins, and write them plus a manifest to the output directory.

use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use tandem::rng::{child_rng, subseed};
use tandem::surface::{
    gp_cheap_surface_in_bin, gp_surface_sample, spearman_bin_bounds, Domain, PairProvenance,
    RbfKernel, SurfacePair,
};
use tandem::Error;

use crate::config::GenSurfacesConfig;

/// One accepted pair in the manifest.
struct ManifestRow {
    bin: usize,
    pair: usize,
    spearman: f64,
    csv: String,
    meta: String,
}

pub fn run(config: &GenSurfacesConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let kernel = RbfKernel::new(config.variance, config.length_scale)?;
    let domain = Domain::grid(0.0, 1.0, &vec![config.grid; config.dim])?;
    let bins: Vec<usize> = config.bins.clone().unwrap_or_else(|| (0..8).collect());

    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;

    let mut manifest = Vec::new();
    for &bin in &bins {
        for j in 0..config.pairs_per_bin {
            // One seed stream per (bin, pair) slot, so adding bins or pairs
            // never disturbs the surfaces of other slots.
            let slot = subseed(config.seed, (bin * config.pairs_per_bin + j) as u64);
            let y_exp = gp_surface_sample(
                &kernel,
                &domain,
                config.n_anchors,
                &mut child_rng(slot, 0),
            )?;
            let accepted = gp_cheap_surface_in_bin(
                &kernel,
                &domain,
                config.n_anchors,
                y_exp.as_slice().unwrap(),
                bin,
                subseed(slot, 1),
                config.max_attempts,
            );
            let (y_cheap, _) = match accepted {
                Ok(hit) => hit,
                Err(Error::BinUnreachable { attempts, .. }) => {
                    let (lo, hi) = spearman_bin_bounds(bin);
                    eprintln!(
                        "warning: no cheap surface landed in bin {bin} \
                         [{lo:.2},{hi:.2}] for pair {j} after {attempts} draws; skipping"
                    );
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let pair = SurfacePair::from_values(
                domain.clone(),
                y_cheap,
                y_exp.to_vec(),
                PairProvenance::Gp { seed: slot, n_anchors: config.n_anchors, kernel },
            )?;
            let csv = format!("pair_bin{bin}_{j:03}.csv");
            let meta = format!("pair_bin{bin}_{j:03}.json");
            pair.save(&out.join(&csv), &out.join(&meta))?;
            manifest.push(ManifestRow { bin, pair: j, spearman: pair.spearman, csv, meta });
        }
    }

    let path = out.join("manifest.csv");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(w, "bin,bin_lo,bin_hi,pair,spearman,csv,meta")?;
    for row in &manifest {
        let (lo, hi) = spearman_bin_bounds(row.bin);
        writeln!(
            w,
            "{},{lo},{hi},{},{},{},{}",
            row.bin, row.pair, row.spearman, row.csv, row.meta
        )?;
    }
    w.flush()?;
    println!(
        "wrote {} of {} requested pairs to {}",
        manifest.len(),
        bins.len() * config.pairs_per_bin,
        out.display()
    );
    Ok(())
}
