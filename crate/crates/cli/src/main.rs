//! `revkam`: command-line driver for the KAM and Liénard experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use revkam::Error;

#[derive(Parser, Debug)]
#[command(
    name = "revkam",
    version,
    about = "Invariant tori of reversible maps and flows by a Newton-KAM iteration",
    term_width = 100
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON config file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub threads: usize,
    /// Seed for synthetic inputs
    #[arg(long, global = true, default_value_t = 0, value_name = "SEED")]
    pub seed: u64,
    /// Print a machine-readable summary on stdout instead of the plain result
    #[arg(long, global = true)]
    pub json_summary: bool,
    /// Override a config entry, e.g. --set stability.t_max=100; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// More diagnostics on stderr; repeat for more
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Diophantine certificate of a frequency vector
    Dioph(DiophArgs),
    /// Smoothing error against the width for a synthetic input of given smoothness
    SmoothTest(SmoothArgs),
    /// Solve the homological equations for given or random forcing
    Homsolve(HomsolveArgs),
    /// Newton-KAM runs
    #[command(subcommand)]
    Kam(KamCommand),
    /// Reversible Liénard oscillator experiments
    #[command(subcommand)]
    Lienard(LienardCommand),
    /// Check the digests of a run directory and re-verify its torus
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OmegaKind {
    Golden,
    SqrtPrime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolveMode {
    Flow,
    Map,
}

#[derive(Args, Debug)]
pub struct DiophArgs {
    /// Frequency components, comma separated; overrides --omega-kind
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "W")]
    pub omega: Vec<f64>,
    /// Built-in frequency when --omega is absent
    #[arg(long, value_enum, default_value_t = OmegaKind::Golden)]
    pub omega_kind: OmegaKind,
    /// Dimension of the built-in frequency
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Diophantine exponent; d + 1e-4 when absent
    #[arg(long)]
    pub tau: Option<f64>,
    /// Largest |k| scanned
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    /// Certify the rotation 2π ω of a map instead of a flow frequency
    #[arg(long)]
    pub map: bool,
}

#[derive(Args, Debug)]
pub struct SmoothArgs {
    /// Smoothness exponent of the synthetic input
    #[arg(long)]
    pub ell: f64,
    /// Highest mode of the synthetic input
    #[arg(long, default_value_t = 2048)]
    pub n_max: usize,
    /// Largest smoothing width
    #[arg(long, default_value_t = 0.1)]
    pub s_max: f64,
    /// Smallest smoothing width
    #[arg(long, default_value_t = 0.01)]
    pub s_min: f64,
    /// Number of geometrically spaced widths
    #[arg(long, default_value_t = 9)]
    pub widths: usize,
}

#[derive(Args, Debug)]
pub struct HomsolveArgs {
    /// Field document of f
    #[arg(long, value_name = "FILE", requires = "g", conflicts_with = "random")]
    pub f: Option<PathBuf>,
    /// Field document of g
    #[arg(long, value_name = "FILE", requires = "f")]
    pub g: Option<PathBuf>,
    /// Draw f (even) and g (odd, zero mean) from --seed
    #[arg(long)]
    pub random: bool,
    /// Flow or map equations
    #[arg(long, value_enum, default_value_t = SolveMode::Flow)]
    pub mode: SolveMode,
    /// Frequency
    #[arg(long, value_enum, default_value_t = OmegaKind::Golden)]
    pub omega_kind: OmegaKind,
    /// Dimension of random fields
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Mode cutoff of random fields
    #[arg(long, default_value_t = 8)]
    pub cutoff: usize,
    /// Action degree of random fields
    #[arg(long, default_value_t = 2)]
    pub q_y: usize,
    /// Coefficient size of random fields
    #[arg(long, default_value_t = 1e-3)]
    pub amp: f64,
    /// Exponential decay rate of random coefficients
    #[arg(long, default_value_t = 0.5)]
    pub decay: f64,
    /// Diophantine exponent; d + 1e-4 when absent
    #[arg(long)]
    pub tau: Option<f64>,
    /// Largest |k| scanned by the certificate
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
}

#[derive(Subcommand, Debug)]
pub enum KamCommand {
    /// Run the Newton loop described by --config
    Run,
}

#[derive(Subcommand, Debug)]
pub enum LienardCommand {
    /// Reference orbit of the unperturbed oscillator
    Orbit,
    /// Period-map iterates and the reversibility residual
    Poincare,
    /// Long integrations from several levels and phases
    Stability,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Run directory; --out is used when absent
    #[arg(value_name = "RUN_DIR")]
    pub dir: Option<PathBuf>,
    /// Largest invariance residual accepted
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// 2 for bad parameters or input, 3 for small divisors and failed steps, 4 for I/O.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SmallDivisor { .. } | Error::StepFailure { .. } => 3,
        Error::Io { .. } => 4,
        _ => 2,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(exit_code(&e), e.to_string())
    }
}

/// What a successful command reports.
pub struct Outcome {
    /// Printed on stdout without --json-summary.
    pub stdout: Option<String>,
    pub summary: serde_json::Value,
    /// Exit code when the command finished but its result is a failure.
    pub code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global.clone();
    if g.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(g.threads).build_global() {
            eprintln!("warning: could not set the thread count: {e}");
        }
    }
    let name = commands::command_name(&cli.command);
    match commands::dispatch(&cli) {
        Ok(out) => {
            if g.json_summary {
                let doc = json!({ "command": name, "exit_code": out.code, "result": out.summary });
                println!("{}", serde_json::to_string_pretty(&doc).expect("summary serializes"));
            } else if let Some(s) = out.stdout {
                print!("{s}");
            }
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if g.json_summary {
                let doc = json!({ "command": name, "exit_code": f.code, "error": f.message });
                println!("{}", serde_json::to_string_pretty(&doc).expect("summary serializes"));
            }
            ExitCode::from(f.code)
        }
    }
}
