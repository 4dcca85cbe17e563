//! Closed-loop optimization campaigns.
//!
//! A campaign alternates planner proposals with evaluator calls: each
//! iteration proposes one point for the expensive evaluator (λ strategies
//! rotating round-robin across iterations), optionally measures a batch of
//! random cheap points, retrains the bias-correction model once at least two
//! expensive observations exist, refreshes ρ, and stops as soon as a measured
//! expensive value reaches the target or the expensive budget is exhausted.
//! [`run_suite`] repeats campaigns over paired seeds and reduces them to
//! summary statistics with Wilcoxon signed-rank comparisons between adjacent
//! strategies.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Fidelity};
use crate::error::{Error, Result};
use crate::planner::Planner;
use crate::rng::{child_rng, subseed};
use crate::stats::{average_ranks, summarize};
use crate::surface::{AnalyticSurface, SurfacePair, TrigPairKind};
use crate::twin::{Hyperparams, TwinModel};

/// Search strategies for a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform random expensive proposals; no model, no cheap data.
    Random,
    /// Kernel-density planner on expensive observations only.
    BoOnly,
    /// Planner plus the twin bias-correction model fed by cheap evaluations.
    BoTwin,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::BoOnly => "bo_only",
            Strategy::BoTwin => "bo_twin",
        }
    }
}

/// The surface behind an evaluator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceKind {
    /// Analytic benchmark surface in unit coordinates.
    Analytic { surface: AnalyticSurface, dim: usize },
    /// One side of a trigonometric fixture pair (1-D).
    Trig { pair: TrigPairKind, fidelity: Fidelity },
    /// Nearest-neighbour lookup over a finite point table. When `simplex` is
    /// set, proposals in the unit cube are first mapped through the
    /// stick-breaking transform, so the table must hold compositions with
    /// one more column than the search dimension.
    Lookup { points: Vec<Vec<f64>>, values: Vec<f64>, simplex: bool },
}

impl SurfaceKind {
    /// Dimension of the *search* space the evaluator accepts.
    pub fn dim(&self) -> usize {
        match self {
            SurfaceKind::Analytic { dim, .. } => *dim,
            SurfaceKind::Trig { .. } => 1,
            SurfaceKind::Lookup { points, simplex, .. } => {
                let w = points.first().map_or(0, Vec::len);
                if *simplex { w.saturating_sub(1) } else { w }
            }
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            SurfaceKind::Analytic { surface, .. } => Ok(surface.eval_unit(x)),
            SurfaceKind::Trig { pair, fidelity } => Ok(match fidelity {
                Fidelity::Cheap => pair.cheap(x[0]),
                Fidelity::Expensive => pair.expensive(x[0]),
            }),
            SurfaceKind::Lookup { points, values, simplex } => {
                let probe = if *simplex { crate::planner::to_simplex(x)? } else { x.to_vec() };
                let mut best = None;
                for (i, p) in points.iter().enumerate() {
                    let d: f64 = p
                        .iter()
                        .zip(&probe)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    match best {
                        Some((_, bd)) if bd <= d => {}
                        _ => best = Some((i, d)),
                    }
                }
                let (i, _) =
                    best.ok_or_else(|| Error::argument("lookup table is empty"))?;
                Ok(values[i])
            }
        }
    }
}

/// A measurement channel: a deterministic surface plus cost bookkeeping and
/// an instrumented call counter.
#[derive(Debug, Clone)]
pub struct Evaluator {
    surface: SurfaceKind,
    fidelity: Fidelity,
    cost_per_eval: f64,
    calls: usize,
}

impl Evaluator {
    pub fn new(surface: SurfaceKind, fidelity: Fidelity, cost_per_eval: f64) -> Result<Self> {
        if !(cost_per_eval > 0.0) || !cost_per_eval.is_finite() {
            return Err(Error::argument("cost per evaluation must be positive"));
        }
        if let SurfaceKind::Lookup { points, values, .. } = &surface {
            if points.is_empty() || points.len() != values.len() {
                return Err(Error::argument(
                    "lookup table needs equally many points and values",
                ));
            }
            let w = points[0].len();
            if w == 0 || points.iter().any(|p| p.len() != w) {
                return Err(Error::argument("lookup points must share a positive width"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::argument("lookup values must be finite"));
            }
        }
        if surface.dim() == 0 {
            return Err(Error::argument("evaluator surface has dimension zero"));
        }
        Ok(Evaluator { surface, fidelity, cost_per_eval, calls: 0 })
    }

    /// Lookup evaluator over the grid of one side of a surface pair.
    pub fn from_pair(pair: &SurfacePair, fidelity: Fidelity, cost_per_eval: f64) -> Result<Self> {
        let points: Vec<Vec<f64>> =
            pair.domain.points().rows().into_iter().map(|r| r.to_vec()).collect();
        let values = match fidelity {
            Fidelity::Cheap => pair.y_cheap.clone(),
            Fidelity::Expensive => pair.y_exp.clone(),
        };
        Evaluator::new(
            SurfaceKind::Lookup { points, values, simplex: false },
            fidelity,
            cost_per_eval,
        )
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }

    pub fn cost_per_eval(&self) -> f64 {
        self.cost_per_eval
    }

    /// Number of evaluations performed so far.
    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                expected: format!("point of dimension {}", self.dim()),
                actual: format!("{}", x.len()),
            });
        }
        self.calls += 1;
        self.surface.value(x)
    }
}

/// Configuration of a single campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub strategy: Strategy,
    /// Cheap evaluations per expensive evaluation (used by `BoTwin`).
    pub cheap_per_expensive: usize,
    /// Stop once a measured expensive value is ≤ this threshold.
    pub target: f64,
    /// Hard cap on expensive evaluations.
    pub max_expensive: usize,
    pub seed: u64,
    /// Hyperparameters for the twin model retrained inside the loop.
    pub hyper: Hyperparams,
    /// Folds for the cross-validated ρ estimate.
    pub rho_folds: usize,
}

impl CampaignConfig {
    pub fn new(strategy: Strategy, target: f64, max_expensive: usize, seed: u64) -> Self {
        CampaignConfig {
            strategy,
            cheap_per_expensive: 0,
            target,
            max_expensive,
            seed,
            hyper: Hyperparams::default(),
            rho_folds: 3,
        }
    }

    pub fn with_cheap_ratio(mut self, r: usize) -> Self {
        self.cheap_per_expensive = r;
        self
    }

    pub fn with_hyper(mut self, hyper: Hyperparams) -> Self {
        self.hyper = hyper;
        self
    }

    fn validate(&self, expensive: &Evaluator, cheap: Option<&Evaluator>) -> Result<()> {
        if self.max_expensive == 0 {
            return Err(Error::argument("max_expensive must be at least 1"));
        }
        if !self.target.is_finite() {
            return Err(Error::argument("target must be finite"));
        }
        if self.rho_folds < 2 {
            return Err(Error::argument("rho_folds must be at least 2"));
        }
        if expensive.fidelity() != Fidelity::Expensive {
            return Err(Error::argument("expensive evaluator has the wrong fidelity tag"));
        }
        match (self.strategy, cheap) {
            (Strategy::BoTwin, None) => {
                Err(Error::argument("the bo_twin strategy requires a cheap evaluator"))
            }
            (_, Some(c)) if c.fidelity() != Fidelity::Cheap => {
                Err(Error::argument("cheap evaluator has the wrong fidelity tag"))
            }
            (_, Some(c)) if c.dim() != expensive.dim() => Err(Error::Shape {
                expected: format!("cheap evaluator of dimension {}", expensive.dim()),
                actual: format!("dimension {}", c.dim()),
            }),
            _ => Ok(()),
        }
    }
}

/// One closed-loop iteration as recorded in a campaign trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    /// Random cheap measurements taken this iteration (point, value).
    pub cheap: Vec<(Vec<f64>, f64)>,
    /// The expensive proposal and its measured value.
    pub x: Vec<f64>,
    pub y: f64,
    /// λ used by the planner for this proposal (absent for `Random`).
    pub lambda: Option<f64>,
    /// ρ in effect when this proposal was made (None until the model has
    /// been cross-validated at least once).
    pub rho: Option<f64>,
    pub best_so_far: f64,
    pub cumulative_cost: f64,
}

/// Why a campaign stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CampaignStatus {
    /// A measured expensive value reached the target.
    TargetReached,
    /// The expensive budget ran out first.
    BudgetExhausted,
    /// An evaluator or model failure ended the campaign early; the record
    /// holds the iterations completed before the failure.
    Aborted { detail: String },
}

/// Full trace of one campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub strategy: Strategy,
    pub iterations: Vec<IterationEntry>,
    pub status: CampaignStatus,
    pub expensive_evals: usize,
    pub cheap_evals: usize,
    pub total_cost: f64,
    /// Best (lowest) expensive value measured, NaN if none was.
    pub best: f64,
}

impl CampaignRecord {
    /// Expensive evaluations spent, counting a full budget when the target
    /// was never reached (a right-censored value that keeps paired suites
    /// comparable).
    pub fn evals_to_target(&self, max_expensive: usize) -> usize {
        match self.status {
            CampaignStatus::TargetReached => self.expensive_evals,
            _ => max_expensive,
        }
    }

    /// One JSON object per iteration, then one [`RecordTail`] line with the
    /// terminal status and totals.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for entry in &self.iterations {
            serde_json::to_writer(&mut w, entry)?;
            writeln!(w)?;
        }
        serde_json::to_writer(&mut w, &self.tail())?;
        writeln!(w)?;
        Ok(())
    }

    /// The terminal line of the JSON-lines trace.
    pub fn tail(&self) -> RecordTail {
        RecordTail {
            strategy: self.strategy.name().to_string(),
            status: self.status.clone(),
            expensive_evals: self.expensive_evals,
            cheap_evals: self.cheap_evals,
            total_cost: self.total_cost,
            best: if self.best.is_nan() { None } else { Some(self.best) },
        }
    }
}

/// Last line of a campaign trace: terminal status plus totals. Kept small
/// and self-contained so summary tables can be rebuilt from trace files
/// without replaying the campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTail {
    pub strategy: String,
    #[serde(flatten)]
    pub status: CampaignStatus,
    pub expensive_evals: usize,
    pub cheap_evals: usize,
    pub total_cost: f64,
    /// Best expensive value measured; `None` when nothing was measured
    /// (JSON `null`, matching how a NaN would serialize).
    pub best: Option<f64>,
}

impl RecordTail {
    /// Same right-censored count as [`CampaignRecord::evals_to_target`].
    pub fn evals_to_target(&self, max_expensive: usize) -> usize {
        match self.status {
            CampaignStatus::TargetReached => self.expensive_evals,
            _ => max_expensive,
        }
    }
}

/// Runs one closed-loop campaign.
///
/// Per iteration: propose one expensive point (uniform for `Random`,
/// planner-driven otherwise, λ rotating across iterations), measure
/// `cheap_per_expensive` random cheap points (`BoTwin` only), measure the
/// expensive point, and stop if it reaches the target. Otherwise the twin
/// model is retrained once ≥ 2 expensive observations exist and ρ is
/// refreshed from its cross-validated reliability, both feeding the next
/// iteration's proposal.
///
/// Evaluator failure mid-campaign yields `Ok` with `CampaignStatus::Aborted`
/// and the iterations completed so far; configuration errors yield `Err`.
pub fn run_campaign(
    config: &CampaignConfig,
    expensive: &mut Evaluator,
    mut cheap: Option<&mut Evaluator>,
) -> Result<CampaignRecord> {
    config.validate(expensive, cheap.as_deref())?;
    let dim = expensive.dim();
    let mut rng = child_rng(config.seed, 0);
    let mut planner = Planner::with_default_lambdas(dim)?;
    let mut dataset = Dataset::new(dim);
    let mut model: Option<TwinModel> = None;

    let mut record = CampaignRecord {
        strategy: config.strategy,
        iterations: Vec::new(),
        status: CampaignStatus::BudgetExhausted,
        expensive_evals: 0,
        cheap_evals: 0,
        total_cost: 0.0,
        best: f64::NAN,
    };

    for iteration in 0..config.max_expensive {
        let abort = |record: &mut CampaignRecord, e: Error| {
            record.status = CampaignStatus::Aborted { detail: e.to_string() };
        };

        // (1) one expensive proposal.
        let (x, lambda) = match config.strategy {
            Strategy::Random => {
                let x: Vec<f64> =
                    (0..dim).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
                (x, None)
            }
            Strategy::BoOnly | Strategy::BoTwin => {
                let predictor = model
                    .as_ref()
                    .map(|m| m as &dyn crate::planner::MeanPredictor);
                let p = planner.propose(1, predictor, &mut rng)?.remove(0);
                (p.x, Some(p.lambda))
            }
        };
        let rho_at_proposal = planner.rho();

        // (2) random cheap measurements.
        let mut cheap_evals = Vec::new();
        if config.strategy == Strategy::BoTwin {
            let cheap_eval = cheap.as_deref_mut().expect("validated above");
            for _ in 0..config.cheap_per_expensive {
                let xc: Vec<f64> =
                    (0..dim).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
                match cheap_eval.eval(&xc) {
                    Ok(yc) => {
                        record.cheap_evals += 1;
                        record.total_cost += cheap_eval.cost_per_eval();
                        dataset.push_cheap(xc.clone(), yc)?;
                        cheap_evals.push((xc, yc));
                    }
                    Err(e) => {
                        abort(&mut record, e);
                        return Ok(record);
                    }
                }
            }
        }

        // (3) the expensive measurement.
        let y = match expensive.eval(&x) {
            Ok(y) => y,
            Err(e) => {
                abort(&mut record, e);
                return Ok(record);
            }
        };
        record.expensive_evals += 1;
        record.total_cost += expensive.cost_per_eval();
        record.best = if record.best.is_nan() { y } else { record.best.min(y) };
        if config.strategy != Strategy::Random {
            planner.observe(x.clone(), y)?;
        }
        if config.strategy == Strategy::BoTwin {
            dataset.push_expensive(x.clone(), y)?;
        }

        record.iterations.push(IterationEntry {
            iteration,
            cheap: cheap_evals,
            x,
            y,
            lambda,
            rho: rho_at_proposal,
            best_so_far: record.best,
            cumulative_cost: record.total_cost,
        });

        // (6) target check happens at measurement time: a hit makes the
        // retraining below pointless, so it is skipped.
        if y <= config.target {
            record.status = CampaignStatus::TargetReached;
            return Ok(record);
        }

        // (4) + (5) retrain the twin and refresh ρ for the next proposal.
        if config.strategy == Strategy::BoTwin
            && dataset.count(Fidelity::Expensive) >= 2
        {
            let mut m = match model.take() {
                Some(m) => m,
                None => TwinModel::new(
                    dim,
                    config.hyper.clone(),
                    &mut child_rng(config.seed, 1),
                )?,
            };
            let train_seed = subseed(config.seed, 0x100 + iteration as u64);
            if let Err(e) = m.train(&dataset, train_seed) {
                abort(&mut record, e);
                return Ok(record);
            }
            let rho_seed = subseed(config.seed, 0x8000 + iteration as u64);
            match planner.update_rho(&dataset, config.rho_folds, &config.hyper, rho_seed) {
                Ok(_) => model = Some(m),
                Err(e) => {
                    abort(&mut record, e);
                    return Ok(record);
                }
            }
        }
    }
    Ok(record)
}

/// One strategy variant inside a suite: a campaign configuration plus the
/// evaluators it runs against (cloned fresh for every repeat).
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub label: String,
    pub config: CampaignConfig,
    pub expensive: Evaluator,
    pub cheap: Option<Evaluator>,
}

/// Summary statistics of one strategy over the suite repeats.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub strategy: String,
    pub r: usize,
    pub target: f64,
    pub mean: f64,
    pub sem: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Wilcoxon signed-rank p versus the previous row (paired by seed).
    pub p_vs_previous: Option<f64>,
}

/// Outcome of a suite: per-strategy rows plus the raw paired counts
/// (`counts[i][j]` = expensive evals to target for entry `i`, repeat `j`).
#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
    pub counts: Vec<Vec<usize>>,
}

impl SuiteSummary {
    /// Summary CSV: strategy, r, target, mean, sem, q1, median, q3,
    /// p_vs_previous (empty for the first row).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "strategy,r,target,mean,sem,q1,median,q3,p_vs_previous")?;
        for row in &self.rows {
            let p = row.p_vs_previous.map_or(String::new(), |p| format!("{p:.6}"));
            writeln!(
                w,
                "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
                row.strategy, row.r, row.target, row.mean, row.sem, row.q1, row.median, row.q3, p
            )?;
        }
        Ok(())
    }
}

/// Descriptive facts about one suite entry, enough to summarize its runs
/// without the entry itself (e.g. from trace files on disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub label: String,
    /// Cheap evaluations per expensive one.
    pub r: usize,
    pub target: f64,
    pub max_expensive: usize,
}

impl SuiteEntry {
    pub fn meta(&self) -> EntryMeta {
        EntryMeta {
            label: self.label.clone(),
            r: self.config.cheap_per_expensive,
            target: self.config.target,
            max_expensive: self.config.max_expensive,
        }
    }
}

/// Runs every suite entry `n_repeats` times with paired seeds (repeat `j`
/// of every entry uses the same derived seed). `records[i][j]` is entry
/// `i`, repeat `j`. An aborted campaign is an error here — a missing cell
/// would break the pairing the suite exists to provide. Repeats run
/// concurrently; results are ordered, so the outcome is independent of
/// thread count.
pub fn run_suite_records(
    entries: &[SuiteEntry],
    n_repeats: usize,
) -> Result<Vec<Vec<CampaignRecord>>> {
    use rayon::prelude::*;

    if entries.is_empty() {
        return Err(Error::argument("suite needs at least one entry"));
    }
    if n_repeats < 2 {
        return Err(Error::argument("suite needs at least two repeats"));
    }
    let jobs: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|i| (0..n_repeats).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<CampaignRecord>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let entry = &entries[i];
            let mut config = entry.config.clone();
            config.seed = subseed(entry.config.seed, j as u64);
            let mut expensive = entry.expensive.clone();
            let mut cheap = entry.cheap.clone();
            let record = run_campaign(&config, &mut expensive, cheap.as_mut())?;
            if let CampaignStatus::Aborted { detail } = &record.status {
                return Err(Error::argument(format!(
                    "repeat {j} of {} aborted: {detail}",
                    entry.label
                )));
            }
            Ok(record)
        })
        .collect();

    let mut records = vec![Vec::with_capacity(n_repeats); entries.len()];
    for (&(i, _), res) in jobs.iter().zip(results) {
        records[i].push(res?);
    }
    Ok(records)
}

/// Reduces paired evaluations-to-target counts (`counts[i][j]` = entry `i`,
/// repeat `j`; repeats aligned across entries) to summary rows with a
/// Wilcoxon signed-rank p-value against the preceding entry.
pub fn summarize_counts(meta: &[EntryMeta], counts: Vec<Vec<usize>>) -> Result<SuiteSummary> {
    if meta.len() != counts.len() {
        return Err(Error::Shape {
            expected: format!("{} count vectors", meta.len()),
            actual: format!("{}", counts.len()),
        });
    }
    let mut rows = Vec::with_capacity(meta.len());
    for (i, m) in meta.iter().enumerate() {
        let values: Vec<f64> = counts[i].iter().map(|&c| c as f64).collect();
        let s = summarize(&values)
            .ok_or_else(|| Error::argument("summary needs at least one value"))?;
        let p_vs_previous = if i == 0 {
            None
        } else {
            let prev: Vec<f64> = counts[i - 1].iter().map(|&c| c as f64).collect();
            Some(wilcoxon_signed_rank(&values, &prev)?)
        };
        rows.push(SuiteRow {
            strategy: m.label.clone(),
            r: m.r,
            target: m.target,
            mean: s.mean,
            sem: s.sem,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            p_vs_previous,
        });
    }
    Ok(SuiteSummary { rows, counts })
}

/// [`run_suite_records`] reduced straight to the summary table. Campaigns
/// that never reach the target count as a full budget.
pub fn run_suite(entries: &[SuiteEntry], n_repeats: usize) -> Result<SuiteSummary> {
    let records = run_suite_records(entries, n_repeats)?;
    let meta: Vec<EntryMeta> = entries.iter().map(SuiteEntry::meta).collect();
    let counts = meta
        .iter()
        .zip(&records)
        .map(|(m, rs)| rs.iter().map(|r| r.evals_to_target(m.max_expensive)).collect())
        .collect();
    summarize_counts(&meta, counts)
}

/// Two-sided Wilcoxon signed-rank test for paired samples.
///
/// Zero differences are dropped (all-zero pairs give p = 1); |differences|
/// are ranked with average ranks for ties. The p-value comes from the exact
/// permutation distribution for n ≤ 25 remaining pairs and from the normal
/// approximation with tie correction and continuity correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::argument("paired samples must have equal lengths"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::argument("differences must be finite"));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }
    if n < 5 {
        return Err(Error::argument(
            "need at least 5 nonzero differences for the signed-rank test",
        ));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let t = w_plus.min(total - w_plus);
    if n <= 25 {
        Ok(exact_two_sided_p(&ranks, t))
    } else {
        Ok(normal_two_sided_p(&ranks, t))
    }
}

/// P(W ≤ t) under the exact null (each rank positive with probability ½),
/// doubled for the two-sided test. Ranks are doubled to make tied average
/// ranks integral, so the distribution is exact even with ties.
fn exact_two_sided_p(ranks: &[f64], t: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let top: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments with doubled rank sum s.
    let mut counts = vec![0f64; top + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=top).rev() {
            counts[s] += counts[s - r];
        }
    }
    let cutoff = (2.0 * t).round() as usize;
    let below: f64 = counts[..=cutoff.min(top)].iter().sum();
    let p = 2.0 * below / 2f64.powi(ranks.len() as i32);
    p.min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn normal_two_sided_p(ranks: &[f64], t: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // Tie correction: group sizes over equal ranks.
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let g = (j - i) as f64;
        tie_term += g * g * g - g;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    // Continuity correction towards the mean; T ≤ mean by construction.
    let z = (t - mean + 0.5) / var.sqrt();
    let p = 2.0 * 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    p.min(1.0)
}
