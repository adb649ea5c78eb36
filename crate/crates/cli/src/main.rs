use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use knnval::combination_validation::{combination_bound_from, ScheduleKind};
use knnval::concentration::Direction;
use knnval::dataset::{generate_quadrant_dataset, shuffle_with_permutation, Dataset, Permutation};
use knnval::dependent_bounds::{bound_from, suggest_m, suggest_r, BoundConfig, BoundVariant, Evaluations};
use knnval::exec::Execution;
use knnval::harness::{
    run_coverage, run_experiment, summary_path, verify_identity, CoverageConfig, CoverageSuite, ExperimentConfig,
};
use knnval::independent_bounds::{independent_bound, suggest_m_independent, PermutationPlan};
use knnval::rng;

#[derive(Parser)]
#[command(name = "knnval", version, about = "Validation bounds for k-nearest-neighbor classifiers")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic quadrant data set as CSV.
    Generate(GenerateArgs),
    /// Bound the error of the classifier built from a data set.
    Bound(BoundArgs),
    /// Run a grid of trials and write per-trial CSV plus a summary.
    Experiment(ExperimentArgs),
    /// Check the inclusion and exclusion identity on a finite domain.
    VerifyIdentity(IdentityArgs),
    /// Monte Carlo coverage of the bounds.
    Coverage(CoverageArgs),
    /// Suggest r, m, w and q for a data set size.
    SuggestParams(SuggestArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = knnval::harness::DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    ResultBound,
    TestBound,
    Combination,
    Independent,
    IndependentTight,
}

#[derive(Args)]
struct BoundArgs {
    /// CSV data: input coordinates then a 0/1 label per line.
    #[arg(long)]
    data: PathBuf,
    /// Seed for the tiebreak values assigned on load.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Shuffle the examples with this seed before partitioning.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long, value_enum, default_value = "test-bound")]
    method: Method,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Validation subset size; suggested from n when omitted.
    #[arg(long)]
    m: Option<usize>,
    /// Holdout size; equal to m when omitted.
    #[arg(long)]
    w: Option<usize>,
    /// Truncation depth; r - 1 for the test bound and r otherwise when omitted.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 0.025)]
    delta: f64,
    #[arg(long, default_value_t = 0.025)]
    delta_w: f64,
    #[arg(long, default_value = "upper")]
    direction: Direction,
    /// Sampled permutations; defaults to min(n, 256).
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0.025)]
    delta_q: f64,
    #[arg(long, default_value_t = 7)]
    permutation_seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    m_fractions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    r_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    d_values: Option<Vec<usize>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    delta_w: Option<f64>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write 0 in the runtime column so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    ResultBound,
    TestBound,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long, default_value_t = 200)]
    domain_size: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, default_value = "all")]
    suite: CoverageSuite,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value_t = 100_000)]
    test_size: usize,
    #[arg(long, default_value_t = 100)]
    q: usize,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Number of validation subsets; suggested from n when omitted.
    #[arg(long)]
    r: Option<usize>,
}

fn writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let data = generate_quadrant_dataset(args.n, args.dim, args.noise, args.seed)?;
    let mut out = writer(&args.out)?;
    data.write_csv(&mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn bound(args: BoundArgs, exec: Execution) -> Result<ExitCode> {
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let mut examples = Dataset::read_csv(BufReader::new(file), args.seed)?.into_examples();
    let n = examples.len();
    if let Some(s) = args.shuffle_seed {
        let perm = Permutation::random(n, &mut rng::stream(s, rng::TAG_SHUFFLE, 0));
        examples = shuffle_with_permutation(&examples, &perm)?;
    }
    let independent = matches!(args.method, Method::Independent | Method::IndependentTight);
    let m = match args.m {
        Some(m) => m,
        None if independent => suggest_m_independent(n, args.k, args.r)?.0,
        None => suggest_m(n, args.k, args.r)?.0,
    };
    let w = if independent { 0 } else { args.w.unwrap_or(m) };
    let mut cfg = BoundConfig::result_bound(args.k, args.r, m, w, args.delta, args.delta_w).with_direction(args.direction);
    let report = match args.method {
        Method::Independent | Method::IndependentTight => {
            let q = args.q.unwrap_or_else(|| {
                let q = n.min(256);
                if q < n {
                    eprintln!("warning: using q = {q} sampled permutations; pass --q {n} for q = n");
                }
                q
            });
            let plan = PermutationPlan::new(q, args.permutation_seed, args.delta_q)?;
            independent_bound(&examples, &cfg, &plan, matches!(args.method, Method::IndependentTight), exec)?
        }
        Method::ResultBound | Method::TestBound | Method::Combination => {
            if let Method::TestBound = args.method {
                cfg.variant = BoundVariant::BernsteinTestBound;
                cfg.depth = args.depth.unwrap_or(args.r.saturating_sub(1));
            } else if let Some(d) = args.depth {
                cfg.depth = d;
            }
            let partition = cfg.partition(&examples)?;
            let evals = Evaluations::compute(&partition, cfg.k, exec)?;
            match args.method {
                Method::Combination => combination_bound_from(&evals, &cfg, ScheduleKind::ClosedForm)?,
                _ => bound_from(&evals, &cfg)?,
            }
        }
    };
    println!("{}", report.to_record());
    println!("reported_bound={}", report.clamped());
    Ok(ExitCode::SUCCESS)
}

fn experiment_config(args: ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => { $( if let Some(v) = args.$field { cfg.$field = v; } )* };
    }
    apply!(n, k, dim, noise, trials, m_fractions, r_values, delta, delta_w, test_size, seed);
    if let Some(d) = args.d_values {
        cfg.d_values = Some(d);
    }
    if let Some(v) = args.variant {
        cfg.variant = match v {
            VariantArg::ResultBound => BoundVariant::HoeffdingResultBound,
            VariantArg::TestBound => BoundVariant::BernsteinTestBound,
        };
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    if args.no_timing {
        cfg.timing = false;
    }
    Ok(cfg)
}

fn experiment(args: ExperimentArgs, exec: Execution) -> Result<ExitCode> {
    let cfg = experiment_config(args)?;
    let result = run_experiment(&cfg, exec)?;
    match &cfg.output {
        Some(p) => {
            eprintln!("wrote {} and {}", p.display(), summary_path(p).display());
            print!("{}", result.summary_csv());
        }
        None => {
            print!("{}", result.records_csv());
            eprint!("{}", result.summary_csv());
        }
    }
    if let Some(best) = result.tightest() {
        eprintln!("tightest cell: r={} d={} m={} mean gap {:.4}", best.r, best.d, best.m, best.mean_gap);
    }
    Ok(ExitCode::SUCCESS)
}

fn identity(args: IdentityArgs) -> Result<ExitCode> {
    let report = verify_identity(args.domain_size, args.r, args.k, args.seed)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn coverage(args: CoverageArgs, exec: Execution) -> Result<ExitCode> {
    let cfg = CoverageConfig { n: args.n, k: args.k, r: args.r, test_size: args.test_size, q: args.q, ..CoverageConfig::default() };
    let report = run_coverage(args.suite, &cfg, args.reps, args.seed, exec)?;
    for l in &report.lines {
        println!(
            "{} {}: {}/{} violations (rate {:.4}, allowed {:.4})",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.violations,
            l.reps,
            l.rate(),
            l.threshold
        );
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn suggest(args: SuggestArgs) -> Result<ExitCode> {
    if args.n < 2 {
        bail!("n must be at least 2");
    }
    let r = args.r.unwrap_or_else(|| suggest_r(args.n));
    println!("r={r}");
    match suggest_m(args.n, args.k, r) {
        Ok((m, w)) => println!("dependent m={m} w={w}"),
        Err(e) => println!("dependent infeasible: {e}"),
    }
    match suggest_m_independent(args.n, args.k, r) {
        Ok((m, q)) => println!("independent m={m} q={q}"),
        Err(e) => println!("independent infeasible: {e}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Bound(a) => bound(a, exec),
        Command::Experiment(a) => experiment(a, exec),
        Command::VerifyIdentity(a) => identity(a),
        Command::Coverage(a) => coverage(a, exec),
        Command::SuggestParams(a) => suggest(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
