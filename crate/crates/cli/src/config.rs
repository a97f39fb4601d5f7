//! Command-line surface, coordinate syntax and the `key=value` config file.
//!
//! Flag names double as config keys and as the keys of the `params` object
//! echoed into every report, so a report's parameters can be dumped with
//! `--dump-config` and replayed with `--config`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::CliError;

/// Comma-separated reals, e.g. `1,0` or `-2.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords(pub Vec<f64>);

impl FromStr for Coords {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("invalid coordinate {t:?} in {s:?}"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Coords)
    }
}

impl fmt::Display for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for Coords {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Two points separated by a colon, e.g. `-2,0:2,0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair(pub Coords, pub Coords);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("pair {s:?} must look like x1,x2:y1,y2"))?;
        Ok(Pair(a.parse()?, b.parse()?))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Doublewell,
    Circlemap,
}

#[derive(Debug, Parser)]
#[command(name = "rds-lab", version, about = "Synchronisation-by-noise experiments", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    #[arg(long, value_enum, default_value_t = SystemKind::Doublewell)]
    pub system: SystemKind,
    /// State dimension of the double-well system.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Time step of the double-well integrator (the circle map always uses 1).
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Contraction strength of the circle map.
    #[arg(long = "eps-c", default_value_t = 0.3)]
    #[serde(rename = "eps-c")]
    pub eps_c: f64,
    /// Use plain (untamed) Euler–Maruyama for the double-well.
    #[arg(long)]
    pub untamed: bool,
    #[arg(long, env = "RDS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Fixed value recorded as the report's epoch; reports carry no clock time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch: Option<String>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Flat key=value file; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write the resolved parameters as a key=value config file.
    #[arg(long = "dump-config")]
    #[serde(skip)]
    pub dump_config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare φ(s+t, ω) with φ(t, θ^s ω)∘φ(s, ω) over random seeds.
    CocycleCheck(CocycleArgs),
    /// Worst ratio of trajectory separation to the Grönwall bound.
    Gronwall(GronwallArgs),
    /// Maximal Lyapunov exponent along one trajectory.
    Lyapunov(LyapunovArgs),
    /// Pairwise synchronisation frequency.
    Sync(SyncArgs),
    /// Contraction of a small ball around a point.
    Stability(StabilityArgs),
    /// Contractibility of a pair towards a point.
    Contract(ContractArgs),
    /// Transitivity of a point into a ball.
    Transit(TransitArgs),
    /// Double-well flow under a deterministic steering path.
    Steer(SteerArgs),
    /// Pullback clouds and their convergence in the horizon.
    Pullback(PullbackArgs),
    /// Cluster count of the invariant random measure.
    Clusters(ClustersArgs),
    /// Statistical checks of generated Wiener increments.
    NoiseStats(NoiseStatsArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::CocycleCheck(a) => &a.common,
            Command::Gronwall(a) => &a.common,
            Command::Lyapunov(a) => &a.common,
            Command::Sync(a) => &a.common,
            Command::Stability(a) => &a.common,
            Command::Contract(a) => &a.common,
            Command::Transit(a) => &a.common,
            Command::Steer(a) => &a.common,
            Command::Pullback(a) => &a.common,
            Command::Clusters(a) => &a.common,
            Command::NoiseStats(a) => &a.common,
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CocycleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Number of independent noise seeds.
    #[arg(long, default_value_t = 1)]
    pub cases: usize,
    /// Starting state (random per case when absent).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Coords>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GronwallArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Explicit pairs; when absent, `--random-pairs` pairs with |x|,|y| <= 3.
    #[arg(long, allow_hyphen_values = true)]
    pub pair: Vec<Pair>,
    #[arg(long = "random-pairs", default_value_t = 100)]
    pub random_pairs: usize,
    #[arg(long = "T", default_value_t = 20.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LyapunovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Coords>,
    #[arg(long = "T", default_value_t = 2000.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    /// Drive with the zero path instead of a Wiener path (double-well only).
    #[arg(long = "zero-noise")]
    pub zero_noise: bool,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SyncArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub pair: Vec<Pair>,
    #[arg(long = "T", default_value_t = 100.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Coords,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long = "T", default_value_t = 100.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ContractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Coords,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Coords,
    #[arg(long, allow_hyphen_values = true)]
    pub p: Coords,
    #[arg(long = "eps-ball", default_value_t = 0.25)]
    pub eps_ball: f64,
    #[arg(long = "T", default_value_t = 50.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TransitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Coords,
    #[arg(long, allow_hyphen_values = true)]
    pub center: Coords,
    #[arg(long, default_value_t = 0.25)]
    pub radius: f64,
    #[arg(long = "T", default_value_t = 50.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SteerKind {
    Transit,
    Contract,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SteerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub kind: SteerKind,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Coords,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Coords,
    #[arg(long, default_value_t = 100.0)]
    pub eta0: f64,
    /// Transit: required closeness of the end point to `y`.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long, default_value_t = 20.0)]
    pub eta1: f64,
    #[arg(long, default_value_t = 20.0)]
    pub eta2: f64,
    /// Contract: radius of the ball around (1, 0, ...).
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long = "t-star", default_value_t = 5.0)]
    pub t_star: f64,
    /// Contract: end of the run.
    #[arg(long = "T", default_value_t = 50.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    /// CSV trace path (t, x_1..x_d, y_1..y_d).
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PullbackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Non-decreasing horizons, comma-separated.
    #[arg(long, default_value = "25,50")]
    pub horizons: Coords,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Number of independent ω seeds.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Burn-in length for systems without an exact stationary sampler.
    #[arg(long = "t-burn", default_value_t = 100.0)]
    pub t_burn: f64,
    /// Threshold for counting a consecutive-horizon distance as converged.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// CSV dump of the clouds at the largest horizon (trial, atom, coordinates).
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClustersArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "T", default_value_t = 50.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Closeness threshold (default 1e-2 double-well, 0.05 circle map).
    #[arg(long = "eps-cluster")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_cluster: Option<f64>,
    #[arg(long = "t-burn", default_value_t = 100.0)]
    pub t_burn: f64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct NoiseStatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "T", default_value_t = 10.0)]
    #[serde(rename = "T")]
    pub t_max: f64,
    /// CSV dump of the path (t, w_1..w_d).
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

fn config_tokens(text: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices the contents of `--config FILE` into argv right after the
/// subcommand, so that flags given explicitly (which come later) win.
pub fn expand_config(mut argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let pos = argv
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(argv) };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| CliError::Usage("--config requires a path".into()))?,
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("cannot read config {path}: {e}")))?;
    let tokens = config_tokens(&text)?;
    let insert_at = 2.min(argv.len());
    argv.splice(insert_at..insert_at, tokens);
    Ok(argv)
}

/// Renders resolved parameters (as echoed in reports) as a config file.
pub fn to_config_file(params: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = params {
        for (key, value) in map {
            let items = match value {
                Value::Array(items) => items.clone(),
                other => vec![other.clone()],
            };
            for item in items {
                let text = match item {
                    Value::String(s) => s,
                    Value::Null => continue,
                    other => other.to_string(),
                };
                out.push_str(&format!("{key}={text}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_syntax() {
        assert_eq!("1,0".parse::<Coords>().unwrap(), Coords(vec![1.0, 0.0]));
        assert_eq!("-2.5".parse::<Coords>().unwrap(), Coords(vec![-2.5]));
        assert!("1,,0".parse::<Coords>().is_err());
        let p: Pair = "-2,0:2,0".parse().unwrap();
        assert_eq!(p, Pair(Coords(vec![-2.0, 0.0]), Coords(vec![2.0, 0.0])));
        assert_eq!(p.to_string(), "-2,0:2,0");
        assert!("1,0".parse::<Pair>().is_err());
    }

    #[test]
    fn config_lines_become_flags() {
        let t = config_tokens("# c\nseed=7\n\npair = -2,0:2,0\nzero-noise=true\nuntamed=false\n").unwrap();
        assert_eq!(t, vec!["--seed", "7", "--pair", "-2,0:2,0", "--zero-noise"]);
        assert!(config_tokens("oops").is_err());
    }

    #[test]
    fn explicit_flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "seed=3\ntrials=9\n").unwrap();
        let argv: Vec<String> = ["rds-lab", "sync", "--pair", "0:1", "--seed", "5", "--config"]
            .iter()
            .map(|s| s.to_string())
            .chain([path.display().to_string()])
            .collect();
        let cli = Cli::try_parse_from(expand_config(argv).unwrap()).unwrap();
        let Command::Sync(a) = cli.command else { panic!() };
        assert_eq!(a.common.seed, 5);
        assert_eq!(a.trials, 9);
    }
}
