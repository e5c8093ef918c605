//! Command-line surface for the exact edge-posterior engine.
//!
//! Exit codes: 0 success, 1 verification disagreement, 2 parse/argument
//! error, 3 size cap exceeded, 4 I/O error, 5 dimension mismatch.

use bnedge_core::engine::{edge_posteriors_with, EdgePosteriors, EngineConfig};
use bnedge_core::error::Error;
use bnedge_core::model::{Dataset, PriorSpec, RhoFamily, ScoreFamily};
use bnedge_core::study::{
    derive_seed, generate_network, roc_curve, run_study, sample_dataset, GroundTruthNetwork,
    StudyConfig,
};
use bnedge_core::verify::{compare_once, run_agreement_suite, FuzzConfig, ReplayInstance};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "bnedge",
    version,
    about = "Exact per-edge posterior probabilities for discrete Bayesian networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the posterior probability of every directed edge from a dataset
    Posteriors(PosteriorsArgs),
    /// Generate a random ground-truth network and sample records from it
    Simulate(SimulateArgs),
    /// Score a posterior matrix against a ground-truth network (ROC / AUC)
    Roc(RocArgs),
    /// Run the replicated synthetic edge-recovery study grid
    Study(StudyArgs),
    /// Fuzz the engine against the brute-force reference on small instances
    Verify(VerifyArgs),
    /// Time full engine runs over a range of attribute counts
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RhoArg {
    CardinalityUniform,
    Flat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreArg {
    DirichletAllOnes,
    Bdeu,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct PosteriorsArgs {
    /// Dataset file: a header of attribute names, then one comma-separated
    /// row of category indices per record
    #[arg(long)]
    data: PathBuf,
    /// Maximum indegree
    #[arg(long)]
    k: usize,
    /// Override the inferred arities, one value per attribute
    #[arg(long, value_delimiter = ',')]
    arities: Option<Vec<u32>>,
    /// Structure-prior family
    #[arg(long, value_enum, default_value_t = RhoArg::CardinalityUniform)]
    rho: RhoArg,
    /// Local score family
    #[arg(long, value_enum, default_value_t = ScoreArg::DirichletAllOnes)]
    score: ScoreArg,
    /// Equivalent sample size; only valid with --score bdeu
    #[arg(long)]
    ess: Option<f64>,
    /// Output path; defaults to JSON on stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; defaults to the --out extension (json unless .csv)
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Raise the attribute cap from 24 to 26
    #[arg(long)]
    allow_large: bool,
    /// Worker threads; any value reproduces the single-threaded result
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write elapsed_ms as 0 so outputs are byte-reproducible
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Attribute count
    #[arg(long)]
    n: usize,
    /// Maximum indegree of the generated network
    #[arg(long)]
    k: usize,
    /// States per attribute
    #[arg(long)]
    r: u32,
    /// Records to sample
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the ground-truth network JSON
    #[arg(long)]
    out_net: PathBuf,
    /// Where to write the sampled dataset
    #[arg(long)]
    out_data: PathBuf,
}

#[derive(Args)]
struct RocArgs {
    /// Ground-truth network JSON (as written by simulate/study)
    #[arg(long)]
    network: PathBuf,
    /// Posterior JSON (as written by posteriors)
    #[arg(long)]
    posteriors: PathBuf,
    /// Optional curve output (fpr,tpr,threshold per line)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Attribute counts, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Maximum indegrees, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    /// States per attribute, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    r: Vec<u32>,
    /// Nested record-count prefixes, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the report, curve files, and network files
    #[arg(long)]
    out_dir: PathBuf,
    /// Report file name inside --out-dir
    #[arg(long, default_value = "report.csv")]
    report: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write elapsed_ms as 0 so outputs are byte-reproducible
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Randomized instances to compare
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 1729)]
    seed: u64,
    /// Largest attribute count drawn (hard guard at 6)
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Perturb one engine posterior by this amount (harness self-test)
    #[arg(long)]
    inject: Option<f64>,
    /// Where failing instances are serialized for replay
    #[arg(long, default_value = ".")]
    failure_dir: PathBuf,
    /// Re-run one serialized failure instead of fuzzing
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 16)]
    n_min: usize,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Runs per size; the minimum wall time is reported
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long)]
    allow_large: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Posteriors(args) => cmd_posteriors(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Roc(args) => cmd_roc(args),
        Command::Study(args) => cmd_study(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::Overflow(_)
        | Error::ContingencyTooLarge { .. }
        | Error::TruncationSupport { .. }
        | Error::Json { .. } => 2,
        Error::CapExceeded { .. } | Error::GuardExceeded(_) => 3,
        Error::Io { .. } => 4,
        Error::DimensionMismatch(_) => 5,
    }
}

fn build_spec(k: usize, rho: RhoArg, score: ScoreArg, ess: Option<f64>) -> Result<PriorSpec, Error> {
    let rho_family = match rho {
        RhoArg::CardinalityUniform => RhoFamily::CardinalityUniform,
        RhoArg::Flat => RhoFamily::Flat,
    };
    let score_family = match (score, ess) {
        (ScoreArg::DirichletAllOnes, None) => ScoreFamily::DirichletAllOnes,
        (ScoreArg::DirichletAllOnes, Some(_)) => {
            return Err(Error::InvalidArgument(
                "--ess is only valid with --score bdeu".into(),
            ))
        }
        (ScoreArg::Bdeu, ess) => ScoreFamily::Bdeu {
            ess: ess.unwrap_or(1.0),
        },
    };
    PriorSpec::new(k, rho_family, score_family)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_posteriors(args: PosteriorsArgs) -> Result<ExitCode, Error> {
    let spec = build_spec(args.k, args.rho, args.score, args.ess)?;
    let data = Dataset::load(&args.data, args.arities.as_deref())?;
    let config = EngineConfig {
        allow_large: args.allow_large,
        threads: args.threads,
    };
    let mut post = edge_posteriors_with(&data, &spec, &config)?;
    eprintln!(
        "n={} k={} log_marginal={:.12} elapsed_ms={:.3}",
        post.n, post.k, post.log_marginal, post.elapsed_ms
    );
    if args.no_timing {
        post.clear_timing();
    }
    let format = args.format.unwrap_or_else(|| match &args.out {
        Some(path) if path.extension().is_some_and(|e| e == "csv") => FormatArg::Csv,
        _ => FormatArg::Json,
    });
    let text = match format {
        FormatArg::Json => post.to_json_string(),
        FormatArg::Csv => post.to_csv_string(),
    };
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let net_seed = derive_seed(args.seed, 0, 0);
    let data_seed = derive_seed(args.seed, 1, 0);
    let net = generate_network(args.n, args.k, args.r, net_seed)?;
    let data = sample_dataset(&net, args.m, data_seed);
    net.save_json(&args.out_net)?;
    data.save(
        &args.out_data,
        &[format!(
            "simulated: n={} k={} r={} m={} seed={} net_seed={} data_seed={}",
            args.n, args.k, args.r, args.m, args.seed, net_seed, data_seed
        )],
    )?;
    eprintln!(
        "wrote {} and {} ({} edges)",
        args.out_net.display(),
        args.out_data.display(),
        net.n_true_edges()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_roc(args: RocArgs) -> Result<ExitCode, Error> {
    let net = GroundTruthNetwork::load_json(&args.network)?;
    let post = EdgePosteriors::load_json(&args.posteriors)?;
    let curve = roc_curve(&net, &post)?;
    println!("auc={:.16e}", curve.auc);
    if let Some(path) = &args.out {
        write_text(path, &curve.to_csv_string())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_study(args: StudyArgs) -> Result<ExitCode, Error> {
    let cfg = StudyConfig {
        ns: args.n,
        ks: args.k,
        rs: args.r,
        ms: args.m,
        replicates: args.replicates,
        seed: args.seed,
        record_timings: !args.no_timing,
        engine: EngineConfig {
            allow_large: false,
            threads: args.threads,
        },
    };
    let out = run_study(&cfg)?;
    out.write(&args.out_dir, &args.report)?;
    eprintln!(
        "wrote {} rows, {} curves, {} networks to {}",
        out.rows.len(),
        out.curves.len(),
        out.networks.len(),
        args.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    if let Some(path) = &args.replay {
        let instance = ReplayInstance::load_json(path)?;
        let (posterior_gap, marginal_gap) =
            compare_once(&instance.dataset, &instance.spec, args.inject)?;
        println!(
            "replay {}: posterior_gap={posterior_gap:.3e} marginal_gap={marginal_gap:.3e}",
            instance.description
        );
        return Ok(if posterior_gap <= args.tolerance && marginal_gap <= args.tolerance {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        });
    }

    let cfg = FuzzConfig {
        instances: args.instances,
        seed: args.seed,
        max_n: args.n,
        tolerance: args.tolerance,
        inject: args.inject,
    };
    let report = run_agreement_suite(&cfg)?;
    println!(
        "instances={} worst_posterior_gap={:.3e} worst_marginal_gap={:.3e}",
        report.summaries.len(),
        report.worst_posterior_gap,
        report.worst_marginal_gap
    );
    if report.passed() {
        return Ok(ExitCode::SUCCESS);
    }
    std::fs::create_dir_all(&args.failure_dir).map_err(|e| Error::io(&args.failure_dir, e))?;
    for (i, failure) in report.failures.iter().enumerate() {
        let path = args.failure_dir.join(format!("verify_failure_{i}.json"));
        failure.save_json(&path)?;
        eprintln!("disagreement: {} (replay file {})", failure.description, path.display());
    }
    Ok(ExitCode::from(1))
}

/// Peak resident set size of this process, from /proc on Linux.
fn peak_rss_mib() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib / 1024.0)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, Error> {
    if args.n_min < 1 || args.n_min > args.n_max {
        return Err(Error::InvalidArgument(format!(
            "bad size range {}..{}",
            args.n_min, args.n_max
        )));
    }
    if args.repeats < 1 {
        return Err(Error::InvalidArgument("--repeats must be at least 1".into()));
    }
    let config = EngineConfig {
        allow_large: args.allow_large,
        threads: args.threads,
    };
    println!("n,k,elapsed_ms,ratio");
    let mut previous: Option<f64> = None;
    for n in args.n_min..=args.n_max {
        let spec = PriorSpec::default_with_k(args.k.min(n - 1));
        let data = Dataset::empty_shell(n);
        let mut best = f64::INFINITY;
        for _ in 0..args.repeats {
            let start = Instant::now();
            let post = edge_posteriors_with(&data, &spec, &config)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(post.log_marginal);
            best = best.min(elapsed);
        }
        match previous {
            Some(prev) => println!("{n},{},{best:.3},{:.4}", spec.k, best / prev),
            None => println!("{n},{},{best:.3},", spec.k),
        }
        previous = Some(best);
    }
    match peak_rss_mib() {
        Some(mib) => eprintln!("peak_rss_mib={mib:.1}"),
        None => eprintln!("peak_rss_mib=unavailable"),
    }
    Ok(ExitCode::SUCCESS)
}
