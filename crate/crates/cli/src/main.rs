use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use priorband::bench::{self, correlation_probe, SubprocessObjective};
use priorband::distributions::{PriorDistribution, PriorKind};
use priorband::esp::{write_trace, ModePlacement, RandomPolicy, TradeoffPolicy};
use priorband::harness::{
    read_summary, regret_table, relative_ranks, run_matrix, write_csv_rows, write_matrix,
    Benchmark, ExperimentSpec, PriorSpec,
};
use priorband::optimizer::{ladder_for, Algorithm};
use priorband::scheduler::Accounting;
use priorband::space::{Configuration, SearchSpace};

#[derive(Parser)]
#[command(name = "priorband", version, about = "Multi-fidelity HPO with expert priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an algorithm x prior x seed matrix and write per-run logs.
    Run(Box<RunArgs>),
    /// Aggregate a matrix summary into rank or regret tables.
    Report(ReportArgs),
    /// Spearman correlation of each rung with the top fidelity.
    ProbeCorrelation(ProbeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Search-space JSON; required with --objective-cmd.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Built-in benchmark (mfh3-good, mfh3-bad, mfh6-good, mfh6-bad).
    #[arg(long, value_delimiter = ',', conflicts_with = "objective_cmd")]
    benchmark: Vec<String>,
    /// Shell command evaluating one configuration per invocation.
    #[arg(long)]
    objective_cmd: Option<String>,
    /// Algorithm names, comma separated.
    #[arg(long = "algo", value_delimiter = ',', required = true)]
    algos: Vec<String>,
    /// Generated prior kinds (near-optimum, good, bad), comma separated.
    #[arg(long, value_delimiter = ',')]
    prior_kind: Vec<String>,
    /// Prior JSON file with an explicit mode and sigma.
    #[arg(long, conflicts_with = "prior_kind")]
    prior: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    prior_seed: u64,
    /// Budget cap in multiples of z_max.
    #[arg(long, default_value_t = 12.0)]
    budget: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seed range `a..b` (half open), `a..=b`, or a single seed.
    #[arg(long, conflicts_with = "seed")]
    seeds: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Write ESP traces; with a path, also copy the single run's trace there.
    #[arg(long, num_args = 0..=1)]
    trace: Option<Option<PathBuf>>,
    #[arg(long, default_value = "continuation")]
    accounting: String,
    #[arg(long, default_value_t = 3)]
    eta: u64,
    #[arg(long, default_value = "geometric")]
    random_policy: String,
    #[arg(long, default_value = "density-scores")]
    tradeoff_policy: String,
    #[arg(long, default_value = "mode-at-max")]
    mode_placement: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Ranks,
    Regret,
}

#[derive(Args)]
struct ReportArgs {
    kind: ReportKind,
    /// Matrix output directory (or its summary.csv).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value_t = 25)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    eta: u64,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let num = |s: &str| -> Result<u64> {
        s.trim().parse().with_context(|| format!("bad seed `{s}`"))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        bail!("seed range `{text}` is empty");
    }
    Ok(seeds)
}

fn run(args: RunArgs) -> Result<()> {
    let space = args
        .space
        .as_deref()
        .map(|p| SearchSpace::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;

    let benchmarks = match (&args.objective_cmd, args.benchmark.is_empty()) {
        (Some(cmd), true) => {
            let space = space.clone().context("--objective-cmd requires --space")?;
            vec![Benchmark::new("external", Arc::new(SubprocessObjective::new(cmd.clone(), space)))]
        }
        (None, false) => {
            let mut v = Vec::new();
            for name in &args.benchmark {
                let b = Benchmark::builtin(name)?;
                if let Some(s) = &space {
                    if s != b.objective.space() {
                        bail!("--space does not match the search space of `{name}`");
                    }
                }
                v.push(b);
            }
            v
        }
        _ => bail!("give exactly one of --benchmark or --objective-cmd"),
    };

    let algorithms = args
        .algos
        .iter()
        .map(|a| {
            a.parse::<Algorithm>().map_err(|e| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
                anyhow!("{e} (choose from {})", names.join(", "))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut prior_sigma = None;
    let priors = if let Some(path) = &args.prior {
        if benchmarks.len() != 1 {
            bail!("--prior applies to a single benchmark");
        }
        let space = Arc::new(benchmarks[0].objective.space().clone());
        let prior = PriorDistribution::load(space, path)
            .with_context(|| format!("loading {}", path.display()))?;
        prior_sigma = Some(prior.sigma());
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        vec![PriorSpec::Fixed {
            label,
            mode: prior.mode().clone(),
        }]
    } else if args.prior_kind.is_empty() {
        if algorithms.iter().any(|a| a.uses_prior()) {
            bail!("prior-based algorithms need --prior-kind or --prior");
        }
        vec![PriorSpec::Fixed {
            label: "none".into(),
            mode: Configuration::new(Vec::new()),
        }]
    } else {
        args.prior_kind
            .iter()
            .map(|k| Ok(PriorSpec::Generated(k.parse::<PriorKind>()?)))
            .collect::<Result<Vec<_>>>()?
    };

    let seeds = match (&args.seeds, args.seed) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(s)) => vec![s],
        (None, None) => vec![0],
    };

    let mut spec = ExperimentSpec::new(benchmarks, algorithms, priors, seeds, args.budget);
    spec.prior_seed = args.prior_seed;
    spec.workers = args.workers;
    spec.accounting = args.accounting.parse::<Accounting>()?;
    spec.esp.eta = args.eta;
    spec.esp.random_policy = args.random_policy.parse::<RandomPolicy>()?;
    spec.esp.tradeoff_policy = args.tradeoff_policy.parse::<TradeoffPolicy>()?;
    spec.esp.mode_placement = args.mode_placement.parse::<ModePlacement>()?;
    if let Some(s) = prior_sigma {
        spec.prior_sigma = s;
    }

    let result = run_matrix(&spec)?;
    let trace = args.trace.is_some();
    write_matrix(&args.out, &spec, &result, trace)?;

    if let Some(Some(path)) = &args.trace {
        if result.records.len() != 1 {
            bail!("--trace <path> needs exactly one run, got {}", result.records.len());
        }
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trace(&result.records[0].trace, BufWriter::new(f))?;
    }

    for r in &result.records {
        println!(
            "{}/{}/{}/seed_{}: final {:.6} after {} evaluations",
            r.benchmark,
            r.prior,
            r.algorithm,
            r.seed,
            r.final_score(),
            r.history.len()
        );
    }
    for f in &result.failures {
        eprintln!("{}/{}/{}/seed_{} failed: {}", f.benchmark, f.prior, f.algorithm, f.seed, f.error);
    }
    if !result.failures.is_empty() {
        bail!("{} of {} runs failed", result.failures.len(), result.failures.len() + result.records.len());
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let input: &Path = &args.input;
    let path = if input.is_dir() {
        input.join("summary.csv")
    } else {
        input.to_path_buf()
    };
    let rows = read_summary(&path)?;
    match args.kind {
        ReportKind::Ranks => write_csv_rows(&args.out, &relative_ranks(&rows))?,
        ReportKind::Regret => write_csv_rows(&args.out, &regret_table(&rows))?,
    }
    Ok(())
}

fn probe(args: ProbeArgs) -> Result<()> {
    let objective = bench::builtin(&args.benchmark)?;
    let ladder = ladder_for(objective.space(), args.eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut sums = vec![0.0; ladder.len()];
    let mut counts = vec![0usize; ladder.len()];
    let mut reference = 0;
    for _ in 0..args.repeats.max(1) {
        let res = correlation_probe(objective.as_ref(), &ladder, args.n, &mut rng)?;
        reference = res.reference_rung;
        for (i, rho) in res.rho.iter().enumerate() {
            if let Some(r) = rho {
                sums[i] += r;
                counts[i] += 1;
            }
        }
    }
    println!("rung,fidelity,mean_rho");
    let mut means = Vec::new();
    for (i, &z) in ladder.fidelities().iter().enumerate() {
        let mean = (counts[i] > 0).then(|| sums[i] / counts[i] as f64);
        means.push(mean);
        let shown = mean.map(|m| format!("{m:.4}")).unwrap_or_default();
        println!("{i},{z},{shown}");
    }
    let class = match means[reference] {
        Some(m) if m >= bench::HIGH_CORRELATION_THRESHOLD => "high",
        _ => "low",
    };
    println!("# reference rung {reference}: {class} correlation");
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(*a),
        Command::Report(a) => report(a),
        Command::ProbeCorrelation(a) => probe(a),
    }
}
