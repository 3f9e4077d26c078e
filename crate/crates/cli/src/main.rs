//! `atomlaser`: linewidth sweeps, coherence traces, spectra, Q-function
//! snapshots, QND design reports and the invariant self-test.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 usage error, 3 numerical
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ChiGrid, Config, FeedbackMode, MethodChoice};

#[derive(Debug)]
pub struct UsageError(pub String);

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invariant(String),
    Numerical(atomlaser::Error),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<atomlaser::Error> for CliError {
    fn from(e: atomlaser::Error) -> Self {
        use atomlaser::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Regime(_) => CliError::Usage(e.to_string()),
            E::Invariant(_) | E::Truncation { .. } => CliError::Invariant(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Invariant(s) => write!(f, "invariant failure: {s}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "atomlaser", version, about = "Atom laser coherence and linewidth calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linewidth against χ, analytic and numeric, with or without feedback.
    Sweep(Common),
    /// First-order coherence trace g¹(t).
    G1(Common),
    /// Output power spectrum.
    Spectrum(Common),
    /// Q function after evolving |√μ⟩ for a time κt.
    Qfunc(Common),
    /// QND measurement and feedback design report.
    Design(Common),
    /// Run the invariant self-test suite.
    Check(Common),
}

/// Flags shared by all subcommands; each overrides the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML or JSON configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Mean atom number μ.
    #[arg(long)]
    mu: Option<f64>,
    /// Nonlinearity χ = 4μC/κ.
    #[arg(long)]
    chi: Option<f64>,
    /// χ values: `lo:hi:n` (log spaced) or a comma list.
    #[arg(long, value_name = "GRID")]
    chi_grid: Option<String>,
    /// QND measurement and feedback: off, on or both.
    #[arg(long)]
    feedback: Option<FeedbackMode>,
    /// Detection efficiency η.
    #[arg(long)]
    eta: Option<f64>,
    /// resolvent, quadrature, both or analytic.
    #[arg(long)]
    method: Option<MethodChoice>,
    /// Fock-space padding coefficient c in dim = ⌈μ + c√μ⌉ + 1.
    #[arg(long)]
    dim_pad: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Spectrum output window lo:hi in units of κ.
    #[arg(long, value_name = "LO:HI", value_parser = config::parse_range, allow_hyphen_values = true)]
    omega_range: Option<(f64, f64)>,
    /// Evolution time κt for `qfunc`.
    #[arg(long)]
    time: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<Config, CliError> {
        let file = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let flags = Config {
            mu: self.mu,
            chi: self.chi,
            chi_grid: self.chi_grid.clone().map(ChiGrid::Text),
            feedback: self.feedback,
            eta: self.eta,
            method: self.method,
            dim_pad: self.dim_pad,
            out: self.out.clone(),
            jobs: self.jobs,
            omega_range: self.omega_range,
            time: self.time,
            design: None,
        };
        Ok(file.overlay(flags))
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (common, cmd) = match &cli.command {
        Command::Sweep(c) => (c, "sweep"),
        Command::G1(c) => (c, "g1"),
        Command::Spectrum(c) => (c, "spectrum"),
        Command::Qfunc(c) => (c, "qfunc"),
        Command::Design(c) => (c, "design"),
        Command::Check(c) => (c, "check"),
    };
    let cfg = common.resolve()?;
    if let Some(j) = cfg.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match cmd {
        "sweep" => commands::sweep(&cfg).map(|_| true),
        "g1" => commands::g1(&cfg).map(|_| true),
        "spectrum" => commands::spectrum(&cfg).map(|_| true),
        "qfunc" => commands::qfunc(&cfg).map(|_| true),
        "design" => commands::design(&cfg).map(|_| true),
        _ => commands::check(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
