//! Command-line flags and the optional JSON config file they override.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "fockphase", version, about = "Bayesian MMSE phase estimation with fixed-photon-number probes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalFlags {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for optimizer restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Node count for posterior grids.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Optimizer restarts.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    AllBranches,
    #[value(alias = "leftmost-path")]
    #[serde(alias = "leftmost-path")]
    Leftmost,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MMSE, estimator operator and optimal measurement for one probe.
    Mmse {
        /// flat | trunc:<lo>..<hi> | grid:<csv path>
        #[arg(long)]
        prior: Option<String>,
        /// noon:<n> | bs:<n>:<tau> | coeffs:[re,im;...]
        #[arg(long)]
        state: Option<String>,
    },
    /// NOON-state MMSE under truncated flat priors `[0, m]`.
    NoonCurve {
        /// Comma-separated window widths, e.g. 0.1,0.3,pi/2.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<String>>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Optimal probe coefficients for a range of photon numbers.
    Optimize {
        #[arg(long)]
        prior: Option<String>,
        /// `<n>` or `<lo>..<hi>` (inclusive).
        #[arg(long)]
        n: Option<String>,
        /// Also search relative phases.
        #[arg(long)]
        allow_phases: bool,
    },
    /// Best beam-splitter transmissivity under the flat prior.
    BsOptimize {
        #[arg(long)]
        n: Option<String>,
    },
    /// Single-photon adaptive protocol.
    Adaptive {
        #[arg(long)]
        prior: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Add the single-shot column at equal photon number.
        #[arg(long)]
        compare: bool,
        /// Keep the parent's probe instead of re-optimizing it.
        #[arg(long)]
        no_reoptimize: bool,
        /// Also write the JSON tree here when the main output is CSV.
        #[arg(long)]
        tree: Option<PathBuf>,
    },
}

/// Mirror of every flag; all fields optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub restarts: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub prior: Option<String>,
    pub state: Option<String>,
    pub m: Option<Vec<String>>,
    pub n_max: Option<usize>,
    pub n: Option<String>,
    pub allow_phases: Option<bool>,
    pub depth: Option<usize>,
    pub policy: Option<PolicyArg>,
    pub compare: Option<bool>,
    pub no_reoptimize: Option<bool>,
    pub tree: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Settings shared by every command after merging flags over the file.
#[derive(Debug, Clone)]
pub struct Common {
    pub seed: u64,
    pub grid: usize,
    pub restarts: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn merge(flags: &GlobalFlags, file: &FileConfig) -> anyhow::Result<Self> {
        let grid = flags.grid.or(file.grid).unwrap_or(fockphase::prior::DEFAULT_GRID_NODES);
        if grid < 3 {
            bail!("--grid must be at least 3");
        }
        let restarts = flags.restarts.or(file.restarts).unwrap_or(16);
        if restarts == 0 {
            bail!("--restarts must be at least 1");
        }
        Ok(Self {
            seed: flags.seed.or(file.seed).unwrap_or(0),
            grid,
            restarts,
            format: flags.format.or(file.format).unwrap_or(Format::Csv),
            out: flags.out.clone().or_else(|| file.out.clone()),
        })
    }
}

pub fn required<T>(value: Option<T>, name: &str) -> anyhow::Result<T> {
    value.with_context(|| format!("missing --{name} (flag or config file)"))
}

/// `<n>`, `<lo>..<hi>` or `<lo>..=<hi>`, both ends inclusive.
pub fn parse_range(text: &str) -> anyhow::Result<(usize, usize)> {
    let t = text.trim();
    let (lo, hi) = match t.split_once("..") {
        Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
        None => (t, t),
    };
    let lo: usize = lo.trim().parse().with_context(|| format!("bad range `{text}`"))?;
    let hi: usize = hi.trim().parse().with_context(|| format!("bad range `{text}`"))?;
    if lo == 0 || lo > hi {
        bail!("range `{text}` must satisfy 1 <= lo <= hi");
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3").unwrap(), (3, 3));
        assert_eq!(parse_range("1..5").unwrap(), (1, 5));
        assert_eq!(parse_range("2..=4").unwrap(), (2, 4));
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("5..1").is_err());
        assert!(parse_range("a").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = serde_json::from_str(r#"{"seed": 7, "restarts": 4, "format": "json"}"#).unwrap();
        let flags = GlobalFlags { seed: Some(9), ..GlobalFlags::default() };
        let c = Common::merge(&flags, &file).unwrap();
        assert_eq!((c.seed, c.restarts, c.format), (9, 4, Format::Json));
        assert!(serde_json::from_str::<FileConfig>(r#"{"sede": 1}"#).is_err());
    }
}
