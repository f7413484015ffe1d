use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ebitloc::Error;

mod commands;
mod input;

/// Localizability checks, entanglement bounds and protocol simulation for joint
/// quantum measurements.
#[derive(Debug, Parser)]
#[command(name = "ebitloc", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List or show the built-in reference measurements.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Run the teleportation-scheme check at a given level.
    Check {
        measurement: String,
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Treat the measurement as two qudits of this dimension.
        #[arg(long)]
        qudit: Option<usize>,
        #[arg(long)]
        parties: Option<usize>,
        /// Search for an equivalent representative when the raw check fails.
        #[arg(long)]
        class: bool,
        #[arg(long, default_value_t = ebitloc::linalg::PERM_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
    },
    /// Fingerprint and nearest catalog class.
    Classify { measurement: String },
    /// Clifford and teleportation hierarchy membership.
    Hierarchy {
        measurement: String,
        /// clifford, v or vbar; all three when omitted.
        #[arg(long)]
        family: Option<String>,
        /// Test a single level instead of reporting the lowest one.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = ebitloc::hierarchy::K_MAX)]
        k_max: usize,
    },
    /// Enumerate classes with the representation solver.
    Solve {
        #[arg(long)]
        level: usize,
        /// Merge the result into this bank file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical search for localizable measurements.
    Search {
        #[arg(long)]
        level: usize,
        /// bipartite, tripartite or qudit:<d>.
        #[arg(long, default_value = "bipartite")]
        scenario: String,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ebit upper bound from the nonlocal rotation decomposition.
    Clark {
        measurement: String,
        /// zyz or zxz.
        #[arg(long, default_value = "zyz")]
        euler: String,
        /// Also search single nonlocal rotations up to this binary depth.
        #[arg(long)]
        single: Option<u32>,
    },
    /// PPT lower bound on the success probability with n ebits.
    Sdp {
        measurement: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// twirled or full.
        #[arg(long, default_value = "twirled")]
        formulation: String,
        /// Allow the full formulation beyond one ebit.
        #[arg(long)]
        allow_large: bool,
        /// Write the conic program as JSON and exit without solving.
        #[arg(long)]
        dump_conic: Option<PathBuf>,
        /// Check the dual certificate independently.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Simulate the protocol behind a certificate and compare with Born statistics.
    Simulate {
        measurement: String,
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// `random` for Haar-random pure states, or a matrix JSON file.
        #[arg(long, default_value = "random")]
        state: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        qudit: Option<usize>,
        #[arg(long)]
        parties: Option<usize>,
        #[arg(long)]
        class: bool,
    },
    /// Inspect, verify and merge solution banks.
    Bank {
        #[command(subcommand)]
        action: BankAction,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogAction {
    List,
    Show { name: String },
}

#[derive(Debug, Subcommand)]
enum BankAction {
    /// Re-run every entry's raw check (path defaults to $EBITLOC_BANK).
    Verify { path: Option<PathBuf> },
    Show { path: Option<PathBuf> },
    Merge {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Negative = 1,
    Usage = 2,
    Numerical = 3,
}

fn status_for(err: &Error) -> Status {
    match err {
        Error::Numerical(_) | Error::Singular | Error::EmptyKernel(_) => Status::Numerical,
        Error::CertificateMismatch(_) => Status::Negative,
        _ => Status::Usage,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Dimension(_) => "dimension",
        Error::NotUnitary(_) => "not_unitary",
        Error::Singular => "singular",
        Error::UnknownName(_) => "unknown_name",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::EmptyKernel(_) => "empty_kernel",
        Error::Numerical(_) => "numerical",
        Error::CertificateMismatch(_) => "certificate_mismatch",
        Error::Unsupported(_) => "unsupported",
        Error::Json(_) => "json",
        Error::Io(_) => "io",
    }
}

/// One JSON object per line on standard error.
pub fn diagnostic(level: &str, kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "level": level, "kind": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            diagnostic("error", "usage", e.to_string().trim());
            return ExitCode::from(Status::Usage as u8);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            diagnostic("warning", "jobs", &e.to_string());
        }
    }
    let status = match commands::run(cli.command, cli.seed) {
        Ok(s) => s,
        Err(e) => {
            diagnostic("error", error_kind(&e), &e.to_string());
            status_for(&e)
        }
    };
    ExitCode::from(status as u8)
}
