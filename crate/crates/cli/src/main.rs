//! `flatmaj` command-line interface. Every run writes one JSON report to
//! stdout or `--report`; the exit code is 0 (ok), 2 (hypothesis violation),
//! 3 (malformed input), 4 (undetermined), 1 (selftest failure).

mod commands;
mod config;
mod report;
mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use report::{render, Failure, EXIT_MALFORMED, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "flatmaj", version, about = "Convertibility of pairs of flat quantum states")]
struct Cli {
    /// JSON file overriding the default run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Grid points per axis for parameter minimization.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long = "report", global = true, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate Phi and D_hat of a pair at one parameter point.
    Entropy(EntropyArgs),
    /// Decide the entropy inequalities between two pairs.
    Check(CheckArgs),
    /// Optimal conversion rate between two pairs.
    Rate(PairArgs),
    /// Confirm a rate with the feasibility oracle on small tensor powers.
    Certify(CertifyArgs),
    /// Jordan decomposition of two projections, or block extraction from two operators.
    Jordan(JordanArgs),
    /// Explicit channel constructions.
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Smooth a target so that a marginal conversion becomes strict.
    Smooth(SmoothArgs),
    /// Numerical channel-existence oracle.
    Oracle(OracleArgs),
    /// Run a fast invariant battery.
    Selftest,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    #[arg(long)]
    pair: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, required_unless_present = "tropical", conflicts_with = "tropical")]
    z: Option<f64>,
    #[arg(long)]
    tropical: bool,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Asymptotic,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    pairs: PairArgs,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    pairs: PairArgs,
    /// Outputs per input as `num/den`.
    #[arg(long)]
    rate: String,
    #[arg(long, default_value_t = 3)]
    nmax: usize,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
struct JordanArgs {
    /// Projection P as a dense matrix.
    #[arg(long, requires = "q", conflicts_with_all = ["operators", "realize"])]
    p: Option<PathBuf>,
    /// Projection Q as a dense matrix.
    #[arg(long, requires = "p")]
    q: Option<PathBuf>,
    /// Dense operator pair `{"a": .., "b": ..}` to read a flat pair from.
    #[arg(long, conflicts_with = "realize")]
    operators: Option<PathBuf>,
    /// Flat pair to realize as dense operators.
    #[arg(long)]
    realize: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ChannelCommand {
    /// Qubit channel between pure pairs with squared overlaps `fin <= fout`.
    Uhlmann {
        #[arg(long)]
        fin: f64,
        #[arg(long)]
        fout: f64,
        /// Synthesize with the feasibility oracle instead of the closed form.
        #[arg(long)]
        oracle: bool,
    },
    /// Measure-and-prepare protocol from copies of a pure pair to a target.
    PowerUniversal {
        #[arg(long = "F")]
        f: f64,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = flatmaj::channels::M_CAP)]
        m_cap: usize,
    },
}

#[derive(Debug, Args)]
struct SmoothArgs {
    #[arg(long)]
    target: PathBuf,
    /// Input pair; when given, the report checks it against the target before and after smoothing.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    eps: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    DouglasRachford,
    Dykstra,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    pairs: PairArgs,
    /// Copies of the input pair.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Copies of the output pair.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_enum, default_value = "douglas-rachford")]
    engine: EngineArg,
    #[arg(long)]
    emit_channel: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Entropy(_) => "entropy",
            Command::Check(_) => "check",
            Command::Rate(_) => "rate",
            Command::Certify(_) => "certify",
            Command::Jordan(_) => "jordan",
            Command::Channel(ChannelCommand::Uhlmann { .. }) => "channel uhlmann",
            Command::Channel(ChannelCommand::PowerUniversal { .. }) => "channel power-universal",
            Command::Smooth(_) => "smooth",
            Command::Oracle(_) => "oracle",
            Command::Selftest => "selftest",
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(g) = cli.grid {
        cfg.grid_size = g;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.report {
        cfg.output_path = Some(p.display().to_string());
    }
    if let Command::Oracle(o) = &cli.command {
        if let Some(t) = o.tol {
            cfg.tolerances.insert("oracle".into(), t);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(text) = std::env::var("FLATMAJ_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::malformed(format!("FLATMAJ_THREADS = {text:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::malformed(format!("thread pool: {e}")))
}

fn emit(text: &str, path: Option<&str>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::malformed(format!("cannot write {p}: {e}"))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::malformed(format!("cannot write stdout: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_MALFORMED } else { EXIT_OK });
        }
    };
    let name = cli.command.name();
    let cfg = match build_config(&cli).and_then(|cfg| configure_threads().map(|_| cfg)) {
        Ok(cfg) => cfg,
        Err(f) => {
            eprintln!("error: {}", f.message);
            let text = render(name, &RunConfig::default(), &Err(f.clone()));
            let _ = emit(&text, None);
            return ExitCode::from(f.code);
        }
    };
    let outcome = commands::run(&cli.command, &cfg);
    let code = match &outcome {
        Ok(o) => o.code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    let text = render(name, &cfg, &outcome);
    if let Err(f) = emit(&text, cfg.output_path.as_deref()) {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    ExitCode::from(code)
}
