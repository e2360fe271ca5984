//! `cer`: design, simulate, reconstruct and logical-rate commands over
//! line-oriented text files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use config::{layer, ConfigFile};

#[derive(Debug, Parser)]
#[command(name = "cer", version, about = "Cycle error reconstruction toolkit")]
struct Cli {
    /// Master seed; recorded in every output.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with defaults for any flag, one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choose initial states and sequence lengths; writes plan.txt.
    Design(DesignArgs),
    /// Simulate a plan under injected noise; writes dataset.csv.
    Simulate(SimulateArgs),
    /// Fit decays and reconstruct marginals; writes marginals.txt and eigenvalues.csv.
    Reconstruct(ReconstructArgs),
    /// Logical error rates of the Steane pair; writes logical.txt.
    Logical(LogicalArgs),
    /// Quick end-to-end checks.
    Selftest,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignArgs {
    /// transversal7, single, transversal:<k>, or cnot:<n>:<c>-<t>,...
    #[arg(long)]
    pub cycle: Option<String>,
    /// single, 1cnot or 2cnot.
    #[arg(long)]
    pub level: Option<String>,
    /// Restrict the target to these subsets (repeatable).
    #[arg(long = "subset")]
    pub subsets: Option<Vec<String>>,
    /// Sequence lengths, rounded up to multiples of the cycle order.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    /// Expected eigenvalue used to pick lengths when none are given.
    #[arg(long)]
    pub lambda_guess: Option<f64>,
    #[arg(long)]
    pub randomizations: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Noise file: a channel, or `qubits`/`factor` sections.
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// exact, mc or dense.
    #[arg(long)]
    pub method: Option<String>,
    /// Generator of a coherent rotation added to the cycle noise (dense only).
    #[arg(long)]
    pub coherent: Option<String>,
    #[arg(long)]
    pub angle: Option<f64>,
    /// Noise file applied at every easy cycle.
    #[arg(long)]
    pub easy_channel: Option<PathBuf>,
    /// Readout flip probability.
    #[arg(long)]
    pub spam: Option<f64>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Bootstrap resamples for standard errors; 0 disables.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicalArgs {
    #[arg(long)]
    pub marginals: Option<PathBuf>,
    /// Configurations whose probability falls to this value or below are dropped.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Maximum number of enumerated configurations.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Parametric bootstrap resamples over the input marginals; 0 disables.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let core = e.chain().find_map(|c| c.downcast_ref::<cer_core::Error>());
            if let Some(cer_core::Error::NonConvergence {
                iterations,
                infeasibility,
                ..
            }) = core
            {
                eprintln!("diagnostics: iterations={iterations} infeasibility={infeasibility:e}");
            }
            if core.is_some_and(|c| c.is_numerical()) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let out = cli.out.or(file.out.take()).unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Design(mut a) => {
            layer!(a, file.design; cycle, level, subsets, lengths, lambda_guess, randomizations, shots);
            commands::design(a, seed, &out)?;
        }
        Command::Simulate(mut a) => {
            layer!(a, file.simulate; plan, channel, method, coherent, angle, easy_channel, spam);
            commands::simulate(a, cli.seed.or(file.seed), &out)?;
        }
        Command::Reconstruct(mut a) => {
            layer!(a, file.reconstruct; data, bootstrap);
            commands::reconstruct(a, cli.seed.or(file.seed), &out)?;
        }
        Command::Logical(mut a) => {
            layer!(a, file.logical; marginals, threshold, cap, bootstrap);
            commands::logical(a, seed, &out)?;
        }
        Command::Selftest => return Ok(commands::selftest()),
    }
    Ok(ExitCode::SUCCESS)
}
