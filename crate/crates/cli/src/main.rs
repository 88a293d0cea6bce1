//! `choquard`: thresholds, constrained minimization and fiber diagnostics for
//! the mass-constrained Choquard equation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 non-convergence
//! (or failed certification), 3 I/O error.

mod commands;
mod config;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::{ConfigError, Overrides, RunConfig};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "choquard", version, about = "Normalized solutions of the mass-constrained Choquard equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the explicit constants and the threshold bundle.
    Constants(Common),
    /// Mass threshold, barrier roots and a sampled barrier curve.
    Threshold(Common),
    /// Constrained minimization with certification.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the fiber curve of the minimizer.
        #[arg(long)]
        fiber: bool,
        /// Exit 0 on convergence even outside the certified regime.
        #[arg(long)]
        outside_theory: bool,
    },
    /// Fiber curve of a stored field.
    Fiber {
        #[command(flatten)]
        common: Common,
        /// CHQF1 field file.
        field: PathBuf,
    },
    /// Residuals of a stored field.
    Verify {
        #[command(flatten)]
        common: Common,
        /// CHQF1 field file.
        field: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    b: Option<u8>,
    /// A number, or a multiple of the threshold such as `0.5rho0`.
    #[arg(long)]
    rho: Option<String>,
    /// Power sum such as "200*|t|^2 + |t|^(8/3)", or "preset".
    #[arg(long = "G", allow_hyphen_values = true)]
    g: Option<String>,
    /// Grid points per axis.
    #[arg(long)]
    m: Option<usize>,
    /// Box side length.
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    starts: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, fiber: bool, outside_theory: bool) -> Result<RunConfig> {
        let o = Overrides {
            n: self.n,
            alpha: self.alpha,
            b: self.b,
            rho: self.rho.clone(),
            g: self.g.clone(),
            m: self.m,
            l: self.l,
            seed: self.seed,
            starts: self.starts,
            out: self.out.clone(),
            fiber,
            outside_theory,
        };
        RunConfig::load(self.config.as_deref(), &o)
    }
}

fn run(cli: Cli) -> Result<u8> {
    let threads = choquard_core::init_threads_from_env().map_err(config::config_err)?;
    let done = match &cli.command {
        Command::Constants(c) => commands::constants(&c.load(false, false)?, threads)?,
        Command::Threshold(c) => commands::threshold(&c.load(false, false)?, threads)?,
        Command::Solve { common, fiber, outside_theory } => {
            commands::solve_cmd(&common.load(*fiber, *outside_theory)?, threads)?
        }
        Command::Fiber { common, field } => commands::fiber_cmd(&common.load(false, false)?, field, threads)?,
        Command::Verify { common, field } => commands::verify_cmd(&common.load(false, false)?, field, threads)?,
    };
    // Artifacts are already on disk; a closed stdout (`| head`) is not an error.
    let text = serde_json::to_string_pretty(&done.json)?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        r => r?,
    }
    if done.code == 2 {
        let status = done.json.get("status").and_then(|s| s.as_str()).unwrap_or("failed");
        eprintln!("choquard: solve finished with status {status}; partial report written");
    }
    Ok(done.code)
}

/// Exit code for an error: I/O and file-format problems give 3, everything
/// else is a usage or configuration error.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 1;
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<choquard_core::Error>() {
            return match e {
                choquard_core::Error::Io(_) | choquard_core::Error::Format(_) => 3,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
