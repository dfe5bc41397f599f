use std::io::Write;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::Parser;
use fockphase::adaptive::Policy;

mod commands;
mod config;

use config::{required, Cli, Command, Common, FileConfig, PolicyArg};

/// Error split by exit status: 2 for bad input, 3 for numerical failure.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "error: {e:#}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e:#}"),
        }
    }
}

fn need<T>(value: Option<T>, name: &str) -> Result<T, Failure> {
    required(value, name).map_err(Failure::Usage)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let common = Common::merge(&cli.global, &file).map_err(Failure::Usage)?;
    let bytes = match cli.command {
        Command::Mmse { prior, state } => {
            let prior = need(prior.or(file.prior), "prior")?;
            let state = need(state.or(file.state), "state")?;
            commands::mmse(&common, &prior, &state)?
        }
        Command::NoonCurve { m, n_max } => {
            let m = need(m.or(file.m), "m")?;
            let n_max = need(n_max.or(file.n_max), "n-max")?;
            commands::noon_curve(&common, &m, n_max)?
        }
        Command::Optimize { prior, n, allow_phases } => {
            let prior = need(prior.or(file.prior), "prior")?;
            let n = need(n.or(file.n), "n")?;
            let allow_phases = allow_phases || file.allow_phases.unwrap_or(false);
            commands::optimize(&common, &prior, &n, allow_phases)?
        }
        Command::BsOptimize { n } => {
            let n = need(n.or(file.n), "n")?;
            commands::bs_optimize(&common, &n)?
        }
        Command::Adaptive { prior, depth, policy, compare, no_reoptimize, tree } => {
            let prior = need(prior.or(file.prior), "prior")?;
            let policy = match policy.or(file.policy).unwrap_or(PolicyArg::AllBranches) {
                PolicyArg::AllBranches => Policy::AllBranches,
                PolicyArg::Leftmost => Policy::LeftmostPath,
            };
            let args = commands::AdaptiveArgs {
                prior: &prior,
                depth: need(depth.or(file.depth), "depth")?,
                policy,
                compare: compare || file.compare.unwrap_or(false),
                reoptimize: !(no_reoptimize || file.no_reoptimize.unwrap_or(false)),
                tree: tree.or(file.tree),
            };
            commands::adaptive(&common, args)?
        }
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| anyhow!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|e| anyhow!("cannot write output: {e}")),
    };
    written.map_err(Failure::Usage)
}

fn main() -> ExitCode {
    // clap exits with status 2 on bad flags
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.code())
        }
    }
}
