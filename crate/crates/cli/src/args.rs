use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "purify", version, about = "Entanglement purification rates, simulations and sweeps")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeaterless capacity over a distance grid.
    Capacity(SweepArgs),
    /// Single-shot protocol rates, optimized over (k, m) unless both are given.
    SingleShot(SweepArgs),
    /// Iterative protocol rates at finite m.
    Iterate(SweepArgs),
    /// Linear-optics circuit simulation in truncated Fock space.
    Fock(SweepArgs),
    /// Gaussian swapping chain and Devetak-Winter key rates.
    Swap(SweepArgs),
    /// Built-in consistency checks.
    Verify(SweepArgs),
}

impl Command {
    pub fn args(&self) -> &SweepArgs {
        match self {
            Command::Capacity(a)
            | Command::SingleShot(a)
            | Command::Iterate(a)
            | Command::Fock(a)
            | Command::Swap(a)
            | Command::Verify(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Reconciliation {
    #[default]
    Reverse,
    Direct,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Distances in km: a comma list whose items may be start:stop:step ranges.
    #[arg(long, default_value = "0:200:10", allow_hyphen_values = true)]
    pub distance_km: String,
    #[arg(long, default_value_t = 0.2)]
    pub loss_db_per_km: f64,
    /// Transmissivity; replaces the distance grid when given.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub k_max: Option<u32>,
    #[arg(long)]
    pub m_max: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub links: u32,
    /// TMSV amplitude ratio; sets nu = (1+chi^2)/(1-chi^2) for swap.
    #[arg(long)]
    pub chi: Option<f64>,
    /// Local variance of the swapped TMSV links.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_eff: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dark: f64,
    #[arg(long, default_value_t = 0.95)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t)]
    pub direction: Reconciliation,
    #[arg(long)]
    pub cutoff: Option<u16>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Flat key = value file with flag names as keys; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses argv, splicing `--config` entries in front of the explicit flags.
pub fn parse_with_config(argv: Vec<OsString>) -> Result<Cli> {
    let first = Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit());
    let Some(path) = first.command.args().config.clone() else {
        return Ok(first);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let extra = config_args(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut spliced = argv[..2].to_vec();
    spliced.extend(extra.into_iter().map(OsString::from));
    spliced.extend_from_slice(&argv[2..]);
    match Cli::try_parse_from(spliced) {
        Ok(cli) => Ok(cli),
        Err(e) => bail!("invalid config {}: {}", path.display(), e),
    }
}

/// Lines of `key = value`; `#` starts a comment; keys are flag names.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').with_context(|| format!("line {}: expected key = value", no + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("line {}: invalid key {:?}", no + 1, key);
        }
        out.push(format!("--{key}"));
        out.push(value.trim().to_string());
    }
    Ok(out)
}

/// Expands a distance spec such as `1,10,0:200:50` into a grid.
pub fn parse_distances(spec: &str) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => grid.push(parse_km(x)?),
            [a, b, s] => {
                let (start, stop, step) = (parse_km(a)?, parse_km(b)?, parse_km(s)?);
                if !(step > 0.0) || stop < start {
                    bail!("range {item:?} needs start <= stop and step > 0");
                }
                let n = ((stop - start) / step + 1e-9).floor() as u64;
                grid.extend((0..=n).map(|i| start + i as f64 * step));
            }
            _ => bail!("bad distance item {item:?}; use x or start:stop:step"),
        }
    }
    if grid.is_empty() {
        bail!("empty distance grid");
    }
    Ok(grid)
}

fn parse_km(s: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().with_context(|| format!("bad distance {s:?}"))?;
    if !(x >= 0.0) || !x.is_finite() {
        bail!("distance {x} must be finite and non-negative");
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_grids() {
        assert_eq!(parse_distances("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_distances("5, 1,0:20:10").unwrap(), vec![5.0, 1.0, 0.0, 10.0, 20.0]);
        assert_eq!(parse_distances("0:0.3:0.1").unwrap().len(), 4);
        assert!(parse_distances("").is_err());
        assert!(parse_distances("-1").is_err());
        assert!(parse_distances("0:10:0").is_err());
        assert!(parse_distances("1:2").is_err());
    }

    #[test]
    fn config_lines() {
        let args = config_args("# sweep\nk = 2\nloss_db_per_km=0.25 # fibre\n\n--m = 3\n").unwrap();
        assert_eq!(args, ["--k", "2", "--loss-db-per-km", "0.25", "--m", "3"]);
        assert!(config_args("k 2").is_err());
        assert!(config_args("config = other").is_err());
    }

    #[test]
    fn flags_override_config() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "k = 2\nm = 4\n").unwrap();
        let path = file.path().to_str().unwrap();
        let argv: Vec<OsString> =
            ["purify", "single-shot", "--config", path, "--m", "5"].iter().map(Into::into).collect();
        let cli = parse_with_config(argv).unwrap();
        let a = cli.command.args();
        assert_eq!((a.k, a.m), (Some(2), Some(5)));
    }
}
