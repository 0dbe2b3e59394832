//! Seeded experiment matrices, checkpointed incumbent curves, normalized
//! regret, relative ranks and the on-disk output tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bench::{average_ranks, Objective};
use crate::distributions::{PriorDistribution, PriorGenerator, PriorKind, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::esp::{write_trace, EspConfig, TraceRecord};
use crate::optimizer::{self, Algorithm, OptimizerSpec};
use crate::scheduler::{Accounting, ConfigId, History};
use crate::space::Configuration;

/// Checkpoints are spaced this fraction of `z_max` apart.
pub const CHECKPOINT_FRACTION: f64 = 0.1;
const STEPS_PER_ZMAX: u32 = 10;

#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub objective: Arc<dyn Objective>,
}

impl Benchmark {
    pub fn new(name: impl Into<String>, objective: Arc<dyn Objective>) -> Self {
        Self {
            name: name.into(),
            objective,
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Ok(Self::new(name, crate::bench::builtin(name)?))
    }
}

/// Where a run's prior mode comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Generated(PriorKind),
    Fixed { label: String, mode: Configuration },
}

impl PriorSpec {
    pub fn label(&self) -> &str {
        match self {
            PriorSpec::Generated(kind) => kind.as_str(),
            PriorSpec::Fixed { label, .. } => label,
        }
    }
}

#[derive(Clone)]
pub struct ExperimentSpec {
    pub benchmarks: Vec<Benchmark>,
    pub algorithms: Vec<Algorithm>,
    pub priors: Vec<PriorSpec>,
    pub seeds: Vec<u64>,
    /// Seeds the draw of good/bad modes and the near-optimum base, so those
    /// are shared across run seeds.
    pub prior_seed: u64,
    pub workers: usize,
    /// Budget cap in multiples of `z_max`.
    pub budget: f64,
    pub esp: EspConfig,
    pub accounting: Accounting,
    pub prior_sigma: f64,
    pub generator: PriorGenerator,
}

impl ExperimentSpec {
    pub fn new(
        benchmarks: Vec<Benchmark>,
        algorithms: Vec<Algorithm>,
        priors: Vec<PriorSpec>,
        seeds: Vec<u64>,
        budget: f64,
    ) -> Self {
        Self {
            benchmarks,
            algorithms,
            priors,
            seeds,
            prior_seed: 0,
            workers: 1,
            budget,
            esp: EspConfig::default(),
            accounting: Accounting::default(),
            prior_sigma: DEFAULT_SIGMA,
            generator: PriorGenerator::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return bad("budget must be a positive multiple of z_max");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be unique");
        }
        if self.workers == 0 {
            return bad("at least one worker is required");
        }
        if self.benchmarks.is_empty() || self.algorithms.is_empty() || self.priors.is_empty() {
            return bad("benchmarks, algorithms and priors must be non-empty");
        }
        let names: BTreeSet<&str> = self.benchmarks.iter().map(|b| b.name.as_str()).collect();
        if names.len() != self.benchmarks.len() {
            return bad("benchmark names must be unique");
        }
        self.esp.validate()
    }

    pub fn steps(&self) -> u32 {
        (self.budget * STEPS_PER_ZMAX as f64 + 1e-9).floor() as u32
    }
}

/// Incumbent state at one point of the checkpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u32,
    /// Consumed budget in multiples of `z_max`.
    pub budget: f64,
    pub incumbent_id: Option<ConfigId>,
    pub incumbent: Option<Configuration>,
    /// Recorded loss of the incumbent, at whatever fidelity it was observed.
    pub incumbent_loss: f64,
    /// The incumbent re-evaluated at `z_max`; not charged to the budget.
    pub incumbent_at_zmax: f64,
    /// Running minimum of `incumbent_at_zmax`; used for regret and ranks.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub benchmark: String,
    pub prior: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub prior_mode: Option<Configuration>,
    pub checkpoints: Vec<Checkpoint>,
    pub history: History,
    pub trace: Vec<TraceRecord>,
    pub z_max: u64,
    pub budget_epochs: u64,
}

impl RunRecord {
    pub fn final_score(&self) -> f64 {
        self.checkpoints.last().map_or(f64::INFINITY, |c| c.score)
    }
}

#[derive(Debug)]
pub struct CellFailure {
    pub benchmark: String,
    pub prior: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub error: Error,
}

pub struct MatrixResult {
    pub records: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

/// Prior modes per (benchmark, prior, seed). Good and bad modes are drawn once
/// per benchmark; near-optimum modes perturb one shared base per seed.
fn prior_modes(
    spec: &ExperimentSpec,
) -> BTreeMap<(usize, usize, u64), Result<Configuration, String>> {
    let wanted = spec.algorithms.iter().any(Algorithm::uses_prior);
    let mut out = BTreeMap::new();
    if !wanted {
        return out;
    }
    let jobs: Vec<(usize, usize)> = (0..spec.benchmarks.len())
        .flat_map(|b| (0..spec.priors.len()).map(move |p| (b, p)))
        .collect();
    type PerSeed = Vec<(u64, Result<Configuration, String>)>;
    let computed: Vec<((usize, usize), PerSeed)> = jobs
        .par_iter()
        .map(|&(b, p)| {
            let objective = spec.benchmarks[b].objective.as_ref();
            let per_seed = match &spec.priors[p] {
                PriorSpec::Fixed { mode, .. } => {
                    spec.seeds.iter().map(|&s| (s, Ok(mode.clone()))).collect()
                }
                PriorSpec::Generated(kind) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.prior_seed);
                    match spec.generator.base_mode(objective, *kind, &mut rng) {
                        Err(e) => spec
                            .seeds
                            .iter()
                            .map(|&s| (s, Err(e.to_string())))
                            .collect(),
                        Ok(base) => spec
                            .seeds
                            .iter()
                            .map(|&s| {
                                let mode = match kind {
                                    PriorKind::NearOptimum => {
                                        let mut noise = ChaCha8Rng::seed_from_u64(s);
                                        spec.generator
                                            .perturb(objective.space(), &base, &mut noise)
                                            .map_err(|e| e.to_string())
                                    }
                                    PriorKind::Good | PriorKind::Bad => Ok(base.clone()),
                                };
                                (s, mode)
                            })
                            .collect(),
                    }
                }
            };
            ((b, p), per_seed)
        })
        .collect();
    for ((b, p), per_seed) in computed {
        for (s, mode) in per_seed {
            out.insert((b, p, s), mode);
        }
    }
    out
}

/// Incumbent curve on the `0.1 * z_max` grid. The `z_max` re-query is cached
/// per configuration id.
pub fn checkpoints(
    history: &History,
    objective: &dyn Objective,
    steps: u32,
) -> Result<Vec<Checkpoint>> {
    let z_max = objective.space().fidelity().upper;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut requery: BTreeMap<ConfigId, f64> = BTreeMap::new();
    let obs = history.observations();
    let mut next = 0;
    let mut best: Option<usize> = None;
    let mut score = f64::INFINITY;
    let mut out = Vec::with_capacity(steps as usize);
    for step in 1..=steps {
        let limit = step as f64 * CHECKPOINT_FRACTION * z_max as f64;
        while next < obs.len() && obs[next].cumulative_budget as f64 <= limit + 1e-9 {
            let o = &obs[next];
            if !o.failed() && best.is_none_or(|b| o.loss < obs[b].loss) {
                best = Some(next);
            }
            next += 1;
        }
        let cp = match best {
            None => Checkpoint {
                step,
                budget: step as f64 * CHECKPOINT_FRACTION,
                incumbent_id: None,
                incumbent: None,
                incumbent_loss: f64::INFINITY,
                incumbent_at_zmax: f64::INFINITY,
                score,
            },
            Some(b) => {
                let o = &obs[b];
                let at_max = match requery.get(&o.config_id) {
                    Some(&y) => y,
                    None => {
                        let y = if o.fidelity == z_max {
                            o.loss
                        } else {
                            objective
                                .evaluate(&o.config, z_max, &mut rng)
                                .unwrap_or(f64::INFINITY)
                        };
                        requery.insert(o.config_id, y);
                        y
                    }
                };
                score = score.min(at_max);
                Checkpoint {
                    step,
                    budget: step as f64 * CHECKPOINT_FRACTION,
                    incumbent_id: Some(o.config_id),
                    incumbent: Some(o.config.clone()),
                    incumbent_loss: o.loss,
                    incumbent_at_zmax: at_max,
                    score,
                }
            }
        };
        out.push(cp);
    }
    Ok(out)
}

fn run_cell(
    spec: &ExperimentSpec,
    bench: &Benchmark,
    prior_label: &str,
    mode: Option<Configuration>,
    algorithm: Algorithm,
    seed: u64,
) -> Result<RunRecord> {
    let objective = bench.objective.as_ref();
    let space = Arc::new(objective.space().clone());
    let prior = match (&mode, algorithm.uses_prior()) {
        (Some(m), true) => Some(Arc::new(PriorDistribution::new(
            space,
            m.clone(),
            spec.prior_sigma,
        )?)),
        _ => None,
    };
    let opt = OptimizerSpec {
        algorithm,
        esp: spec.esp,
        accounting: spec.accounting,
    };
    let z_max = objective.space().fidelity().upper;
    let budget_epochs = (spec.budget * z_max as f64).ceil() as u64;
    let outcome = optimizer::run(&opt, objective, prior, spec.workers, budget_epochs, seed)?;
    let checkpoints = checkpoints(&outcome.history, objective, spec.steps())?;
    Ok(RunRecord {
        benchmark: bench.name.clone(),
        prior: prior_label.to_string(),
        algorithm,
        seed,
        prior_mode: if algorithm.uses_prior() { mode } else { None },
        checkpoints,
        history: outcome.history,
        trace: outcome.trace,
        z_max,
        budget_epochs,
    })
}

/// Runs every (benchmark, prior, algorithm, seed) cell. Cells run in
/// parallel; results come back in that nested order.
pub fn run_matrix(spec: &ExperimentSpec) -> Result<MatrixResult> {
    spec.validate()?;
    let modes = prior_modes(spec);
    let mut cells = Vec::new();
    for b in 0..spec.benchmarks.len() {
        for p in 0..spec.priors.len() {
            for &algorithm in &spec.algorithms {
                for &seed in &spec.seeds {
                    cells.push((b, p, algorithm, seed));
                }
            }
        }
    }
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(b, p, algorithm, seed)| {
            let bench = &spec.benchmarks[b];
            let label = spec.priors[p].label();
            let mode = match modes.get(&(b, p, seed)) {
                Some(Ok(m)) => Some(m.clone()),
                Some(Err(e)) if algorithm.uses_prior() => {
                    return Err(Error::InvalidArgument(format!(
                        "prior generation failed: {e}"
                    )))
                }
                _ => None,
            };
            run_cell(spec, bench, label, mode, algorithm, seed)
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(b, p, algorithm, seed), res) in cells.iter().zip(results) {
        match res {
            Ok(r) => records.push(r),
            Err(error) => failures.push(CellFailure {
                benchmark: spec.benchmarks[b].name.clone(),
                prior: spec.priors[p].label().to_string(),
                algorithm,
                seed,
                error,
            }),
        }
    }
    Ok(MatrixResult { records, failures })
}

/// Regret per run and checkpoint, normalized per benchmark:
/// `(y - y_best) / (y_ref - y_best)` clipped at zero, where `y_best` is the
/// best score anywhere and `y_ref` the worst score at the `1 x z_max`
/// checkpoint. Undefined (no incumbent yet) entries are `None`.
pub fn normalized_regret(runs: &[&RunRecord]) -> Vec<Vec<Option<f64>>> {
    let finite = |y: f64| y.is_finite().then_some(y);
    let y_best = runs
        .iter()
        .flat_map(|r| r.checkpoints.iter().filter_map(|c| finite(c.score)))
        .fold(f64::INFINITY, f64::min);
    let ref_step = runs
        .iter()
        .map(|r| r.checkpoints.len() as u32)
        .min()
        .unwrap_or(0)
        .min(STEPS_PER_ZMAX);
    let y_ref = runs
        .iter()
        .filter_map(|r| r.checkpoints.iter().find(|c| c.step == ref_step))
        .filter_map(|c| finite(c.score))
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = y_ref - y_best;
    runs.iter()
        .map(|r| {
            r.checkpoints
                .iter()
                .map(|c| {
                    finite(c.score).map(|y| {
                        if gap > 0.0 && gap.is_finite() {
                            ((y - y_best) / gap).max(0.0)
                        } else {
                            0.0
                        }
                    })
                })
                .collect()
        })
        .collect()
}

/// One row of the matrix summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub benchmark: String,
    pub prior: String,
    pub seed: u64,
    pub budget: f64,
    pub rank: Option<f64>,
    pub regret: Option<f64>,
}

/// Per-checkpoint rank (from `1 x z_max` on) and regret for every run.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut regret: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    let mut by_bench: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_bench.entry(&r.benchmark).or_default().push(i);
    }
    for idx in by_bench.values() {
        let runs: Vec<&RunRecord> = idx.iter().map(|&i| &records[i]).collect();
        for (&i, series) in idx.iter().zip(normalized_regret(&runs)) {
            regret.insert(i, series);
        }
    }

    let mut ranks: BTreeMap<(usize, u32), f64> = BTreeMap::new();
    let mut groups: BTreeMap<(&str, &str, u64), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups
            .entry((&r.benchmark, &r.prior, r.seed))
            .or_default()
            .push(i);
    }
    for idx in groups.values() {
        let steps = idx
            .iter()
            .map(|&i| records[i].checkpoints.len())
            .min()
            .unwrap_or(0);
        let first = (STEPS_PER_ZMAX as usize).min(steps).max(1);
        for s in first..=steps {
            let scores: Vec<f64> = idx
                .iter()
                .map(|&i| records[i].checkpoints[s - 1].score)
                .collect();
            for (&i, rank) in idx.iter().zip(average_ranks(&scores)) {
                ranks.insert((i, s as u32), rank);
            }
        }
    }

    let mut rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for (c, reg) in r.checkpoints.iter().zip(&regret[&i]) {
            rows.push(SummaryRow {
                algorithm: r.algorithm.to_string(),
                benchmark: r.benchmark.clone(),
                prior: r.prior.clone(),
                seed: r.seed,
                budget: c.budget,
                rank: ranks.get(&(i, c.step)).copied(),
                regret: *reg,
            });
        }
    }
    rows
}

/// Mean and standard error (sample sd over `sqrt(n)`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn budget_key(b: f64) -> u64 {
    (b * STEPS_PER_ZMAX as f64).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub prior: String,
    pub algorithm: String,
    pub budget: f64,
    pub mean_rank: f64,
    pub se: f64,
    pub seeds: usize,
}

/// Mean relative rank over seeds, each seed's rank averaged over benchmarks.
pub fn relative_ranks(rows: &[SummaryRow]) -> Vec<RankRow> {
    // (prior, algorithm, budget) -> seed -> ranks across benchmarks
    let mut acc: BTreeMap<(&str, &str, u64), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if let Some(rank) = r.rank {
            acc.entry((&r.prior, &r.algorithm, budget_key(r.budget)))
                .or_default()
                .entry(r.seed)
                .or_default()
                .push(rank);
        }
    }
    acc.into_iter()
        .map(|((prior, algorithm, key), seeds)| {
            let per_seed: Vec<f64> = seeds
                .values()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let (mean_rank, se) = mean_se(&per_seed);
            RankRow {
                prior: prior.to_string(),
                algorithm: algorithm.to_string(),
                budget: key as f64 / STEPS_PER_ZMAX as f64,
                mean_rank,
                se,
                seeds: per_seed.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub benchmark: String,
    pub prior: String,
    pub algorithm: String,
    pub budget: f64,
    pub mean_regret: f64,
    pub se: f64,
    pub seeds: usize,
}

pub fn regret_table(rows: &[SummaryRow]) -> Vec<RegretRow> {
    let mut acc: BTreeMap<(&str, &str, &str, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(reg) = r.regret {
            acc.entry((&r.benchmark, &r.prior, &r.algorithm, budget_key(r.budget)))
                .or_default()
                .push(reg);
        }
    }
    acc.into_iter()
        .map(|((benchmark, prior, algorithm, key), v)| {
            let (mean_regret, se) = mean_se(&v);
            RegretRow {
                benchmark: benchmark.to_string(),
                prior: prior.to_string(),
                algorithm: algorithm.to_string(),
                budget: key as f64 / STEPS_PER_ZMAX as f64,
                mean_regret,
                se,
                seeds: v.len(),
            }
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

pub fn run_dir(out: &Path, r: &RunRecord) -> PathBuf {
    out.join(&r.benchmark)
        .join(&r.prior)
        .join(r.algorithm.as_str())
        .join(format!("seed_{}", r.seed))
}

pub fn run_meta(
    spec: &ExperimentSpec,
    r: &RunRecord,
    space_json: impl Fn(&Configuration) -> Value,
) -> Value {
    let final_cp = r.checkpoints.last();
    json!({
        "benchmark": r.benchmark,
        "prior": r.prior,
        "algorithm": r.algorithm.as_str(),
        "seed": r.seed,
        "prior_seed": spec.prior_seed,
        "prior_mode": r.prior_mode.as_ref().map(&space_json),
        "prior_sigma": spec.prior_sigma,
        "workers": spec.workers,
        "budget": spec.budget,
        "budget_epochs": r.budget_epochs,
        "z_max": r.z_max,
        "accounting": spec.accounting.as_str(),
        "eta": spec.esp.eta,
        "random_policy": spec.esp.random_policy.as_str(),
        "tradeoff_policy": spec.esp.tradeoff_policy.as_str(),
        "mode_placement": spec.esp.mode_placement.as_str(),
        "consumed_epochs": r.history.consumed_budget(),
        "evaluations": r.history.len(),
        "incumbent": r.history.incumbent().map(|o| json!({
            "config_id": o.config_id,
            "config": space_json(&o.config),
            "fidelity": o.fidelity,
            "loss": o.loss,
        })),
        "final_incumbent_at_zmax": final_cp.map(|c| c.incumbent_at_zmax).filter(|y| y.is_finite()),
    })
}

/// Writes one run's history, incumbent curve, metadata and (optionally)
/// trace into its directory under `out`.
pub fn emit_outputs(
    out: &Path,
    spec: &ExperimentSpec,
    r: &RunRecord,
    trace: bool,
) -> Result<PathBuf> {
    let dir = run_dir(out, r);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let path = dir.join("history.csv");
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    r.history
        .write_csv(BufWriter::new(f))
        .map_err(|e| Error::io(&path, e))?;

    let path = dir.join("incumbent.csv");
    let mut text = String::from("budget,incumbent_loss,incumbent_at_zmax_loss\n");
    for c in &r.checkpoints {
        text.push_str(&format!(
            "{:.1},{},{}\n",
            c.budget,
            fmt_num(c.incumbent_loss),
            fmt_num(c.incumbent_at_zmax)
        ));
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    if trace && r.algorithm.uses_esp() {
        let path = dir.join("trace.jsonl");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_trace(&r.trace, BufWriter::new(f)).map_err(|e| Error::io(&path, e))?;
    }

    let bench = spec
        .benchmarks
        .iter()
        .find(|b| b.name == r.benchmark)
        .expect("record comes from this experiment");
    let space = bench.objective.space();
    let meta = run_meta(spec, r, |c| Value::Object(space.config_to_json(c)));
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json {
        context: "run metadata".into(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(dir)
}

/// Writes every run plus `summary.csv` and, if any cell failed,
/// `failures.txt`.
pub fn write_matrix(
    out: &Path,
    spec: &ExperimentSpec,
    result: &MatrixResult,
    trace: bool,
) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for r in &result.records {
        emit_outputs(out, spec, r, trace)?;
    }
    write_csv_rows(&out.join("summary.csv"), &summarize(&result.records))?;
    let path = out.join("failures.txt");
    if result.failures.is_empty() {
        if path.exists() {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    } else {
        let text: String = result
            .failures
            .iter()
            .map(|f| {
                format!(
                    "{}/{}/{}/seed_{}: {}\n",
                    f.benchmark, f.prior, f.algorithm, f.seed, f.error
                )
            })
            .collect();
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
    }
}
