//! `gardner`: storage-capacity experiments for classical and quantum
//! perceptrons, written as CSV.
//!
//! Exit codes: 0 on success, 1 when a run finished but failed a
//! consistency check, 2 for usage or configuration errors.

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::Settings;
use output::Table;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Failure(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Failure(m) => write!(f, "failure: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gardner", version, about = "Perceptron storage-capacity experiments")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; `-` or absent writes to standard output.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form capacities.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Replica-symmetric overlap and free energy on a load grid.
    Saddle(SaddleArgs),
    /// Finite-size capacity from SAT/UNSAT bisection.
    Empirical(EmpiricalArgs),
    /// Monte Carlo Gardner volumes.
    Volume(VolumeArgs),
    /// Gaussian circuit checks.
    #[command(subcommand)]
    Circuit(CircuitCommand),
    /// Disorder fluctuations of the volume across dimensions.
    Selfavg(SelfavgArgs),
}

#[derive(Debug, Subcommand)]
enum TheoryCommand {
    /// alpha_c(kappa) on a grid.
    Capacity(CapacityArgs),
    /// Quantum capacity over (kappa, epsilon, sigma) grids.
    Quantum(QuantumArgs),
}

#[derive(Debug, Subcommand)]
enum CircuitCommand {
    /// Simulated circuit moments and homodyne statistics against the closed form.
    Verify(CircuitArgs),
}

#[derive(Debug, Args)]
struct CapacityArgs {
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    kappa_grid: Option<String>,
}

#[derive(Debug, Args)]
struct QuantumArgs {
    #[arg(long)]
    kappa_grid: Option<String>,
    #[arg(long)]
    epsilon_grid: Option<String>,
    #[arg(long)]
    sigma_grid: Option<String>,
}

#[derive(Debug, Args)]
struct TheoryParamArgs {
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Debug, Args)]
struct SaddleArgs {
    #[command(flatten)]
    theory: TheoryParamArgs,
    #[arg(long)]
    alpha_grid: Option<String>,
}

#[derive(Debug, Args)]
struct EmpiricalArgs {
    #[command(flatten)]
    theory: TheoryParamArgs,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// `binary` or `gaussian`.
    #[arg(long)]
    dist: Option<String>,
    /// Use the effective threshold kappa + sigma Phi^-1(1 - epsilon).
    #[arg(long)]
    quantum: bool,
}

#[derive(Debug, Args)]
struct VolumeArgs {
    #[command(flatten)]
    theory: TheoryParamArgs,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    alpha_grid: Option<String>,
    /// `sequential` or `hit_or_miss`.
    #[arg(long)]
    method: Option<String>,
    /// Samples in total (hit_or_miss) or per stage (sequential).
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    quantum: bool,
}

#[derive(Debug, Args)]
struct CircuitArgs {
    /// Largest number of modes; trial t uses 1 + t mod n modes.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Debug, Args)]
struct SelfavgArgs {
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    draws: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    dist: Option<String>,
}

type Overrides = Vec<(&'static str, Option<String>)>;

fn theory_overrides(t: &TheoryParamArgs) -> Overrides {
    vec![("kappa", t.kappa.clone()), ("epsilon", t.epsilon.clone()), ("sigma", t.sigma.clone())]
}

fn flag(on: bool) -> Option<String> {
    on.then(|| "true".to_string())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Theory(TheoryCommand::Capacity(_)) => "theory capacity",
            Self::Theory(TheoryCommand::Quantum(_)) => "theory quantum",
            Self::Saddle(_) => "saddle",
            Self::Empirical(_) => "empirical",
            Self::Volume(_) => "volume",
            Self::Circuit(CircuitCommand::Verify(_)) => "circuit verify",
            Self::Selfavg(_) => "selfavg",
        }
    }

    fn overrides(&self) -> Overrides {
        match self {
            Self::Theory(TheoryCommand::Capacity(a)) => vec![("kappa_grid", a.kappa_grid.clone())],
            Self::Theory(TheoryCommand::Quantum(a)) => vec![
                ("kappa_grid", a.kappa_grid.clone()),
                ("epsilon_grid", a.epsilon_grid.clone()),
                ("sigma_grid", a.sigma_grid.clone()),
            ],
            Self::Saddle(a) => {
                let mut o = theory_overrides(&a.theory);
                o.push(("alpha_grid", a.alpha_grid.clone()));
                o
            }
            Self::Empirical(a) => {
                let mut o = theory_overrides(&a.theory);
                o.extend([
                    ("n", a.n.clone()),
                    ("trials", a.trials.clone()),
                    ("dist", a.dist.clone()),
                    ("quantum", flag(a.quantum)),
                ]);
                o
            }
            Self::Volume(a) => {
                let mut o = theory_overrides(&a.theory);
                o.extend([
                    ("n", a.n.clone()),
                    ("alpha_grid", a.alpha_grid.clone()),
                    ("method", a.method.clone()),
                    ("samples", a.samples.clone()),
                    ("dist", a.dist.clone()),
                    ("quantum", flag(a.quantum)),
                ]);
                o
            }
            Self::Circuit(CircuitCommand::Verify(a)) => vec![
                ("n", a.n.clone()),
                ("trials", a.trials.clone()),
                ("shots", a.shots.clone()),
                ("sigma", a.sigma.clone()),
            ],
            Self::Selfavg(a) => vec![
                ("n_list", a.n_list.clone()),
                ("alpha", a.alpha.clone()),
                ("kappa", a.kappa.clone()),
                ("draws", a.draws.clone()),
                ("samples", a.samples.clone()),
                ("dist", a.dist.clone()),
            ],
        }
    }

    fn run(&self, s: &Settings, seed: u64) -> Result<Table, CliError> {
        match self {
            Self::Theory(TheoryCommand::Capacity(_)) => commands::theory_capacity(s),
            Self::Theory(TheoryCommand::Quantum(_)) => commands::theory_quantum(s),
            Self::Saddle(_) => commands::saddle(s),
            Self::Empirical(_) => commands::empirical(s, seed),
            Self::Volume(_) => commands::volume(s, seed),
            Self::Circuit(CircuitCommand::Verify(_)) => commands::circuit_verify(s, seed),
            Self::Selfavg(_) => commands::selfavg(s, seed),
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let mut settings = Settings::load(cli.config.as_deref())?;
    let global = [
        ("seed", cli.seed.map(|s| s.to_string())),
        ("out", cli.out.clone()),
        ("threads", cli.threads.map(|t| t.to_string())),
    ];
    for (k, v) in global.into_iter().chain(cli.command.overrides()) {
        if let Some(v) = v {
            settings.set(k, &v)?;
        }
    }
    let seed = settings.u64("seed", "1")?;
    let threads = settings.usize("threads", "0")?;
    let out = settings.string("out", "-");
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;

    let table = cli.command.run(&settings, seed)?;

    if out == "-" {
        table.write(io::stdout().lock())
    } else {
        let f = File::create(&out)
            .map_err(|e| CliError::Usage(format!("cannot create {out}: {e}")))?;
        table.write(BufWriter::new(f))
    }
    .map_err(|e| CliError::Failure(format!("cannot write CSV: {e}")))?;

    let mut err = io::stderr().lock();
    let _ = writeln!(err, "# gardner {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(err, "# command = {}", cli.command.name());
    for (k, v) in settings.effective() {
        let _ = writeln!(err, "# {k} = {v}");
    }
    let _ = writeln!(err, "# worker_threads = {}", rayon::current_num_threads());
    let _ = writeln!(err, "# rows = {}", table.rows.len());
    let _ = writeln!(err, "# wall_time_s = {:.3}", started.elapsed().as_secs_f64());

    match table.failure {
        Some(msg) => Err(CliError::Failure(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gardner: {e}");
            ExitCode::from(e.code())
        }
    }
}
