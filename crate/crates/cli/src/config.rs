//! Command-line arguments, TOML config files and their resolution.
//!
//! Every flag of a command has a config-file key of the same name
//! (`--start-norm` ↔ `start-norm`). Flags override file values, and file
//! values override built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rstlab::exploration::Constants;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "RSTLAB_OUT_DIR";
/// Output directory used when neither flag, file nor environment set one.
pub const DEFAULT_OUT_DIR: &str = "rstlab-out";

#[derive(Debug, Parser)]
#[command(name = "rstlab", version, about = "Radial spanning tree simulation and verification lab")]
pub struct Cli {
    /// TOML file with default values for the command's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $RSTLAB_OUT_DIR, else rstlab-out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for trial pools; 0 uses every core [default: 0].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a Poisson point set in a ball and export it.
    Sample(SampleArgs),
    /// Build the radial spanning tree of a sampled or imported point set.
    Build(PointsArgs),
    /// Run the exploration process from `start-norm · e_1` and export its trace.
    Explore(ExploreArgs),
    /// Compute per-vertex subtree angular spread.
    Straightness(StraightnessArgs),
    /// Run a Monte Carlo experiment.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Run a deterministic or fuzzed check.
    #[command(subcommand)]
    Check(Check),
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Survival of the parent distance against its analytic bound.
    PsiTail(PsiTailArgs),
    /// Exceedance of the perpendicular deviation over several start norms.
    Deviation(DeviationArgs),
    /// Tails of good-step gaps, renewal gaps, block lengths and R_Theta.
    Spacing(SpacingArgs),
    /// Reflection coupling campaign and sign tests.
    Symmetry(SymmetryArgs),
}

#[derive(Debug, Subcommand)]
pub enum Check {
    /// Fuzz the geometric lemmas.
    Lemmas(LemmasArgs),
    /// Scan a planar tree for proper edge crossings.
    Planarity(PointsArgs),
    /// Validate the structure of a tree.
    Tree(PointsArgs),
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SampleArgs {
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Ball radius [default: 30].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PointsArgs {
    /// Points CSV to import; when absent a ball is sampled.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sample: SampleArgs,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConstantArgs {
    /// Exploration constant kappa > 1 [default: 2].
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Stopping constant lambda [default: (1/(4d)) (alpha_{1/2}/2)^d].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Constant delta [default: alpha_{1/2}/8].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Exponent epsilon in (0, 1/2) [default: 0.25].
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExploreArgs {
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Norm of the start point [default: 100].
    #[arg(long)]
    pub start_norm: Option<f64>,
    /// Field seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub constants: ConstantArgs,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct StraightnessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: PointsArgs,
    /// Exponent epsilon of the cone aperture |u|^(-1/2+epsilon) [default: 0.25].
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PsiTailArgs {
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Norm of the query point [default: 10].
    #[arg(long)]
    pub x_norm: Option<f64>,
    /// Comma-separated ascending thresholds [default: 0.5,1,2].
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Trials [default: 10000].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DeviationArgs {
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated start norms [default: 50,100,200,400].
    #[arg(long, value_delimiter = ',')]
    pub norms: Option<Vec<f64>>,
    /// Exponent epsilon in (0, 1/2) [default: 0.25].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Trials per norm [default: 500].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SpacingArgs {
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Norm of the start point [default: 200].
    #[arg(long)]
    pub start_norm: Option<f64>,
    /// Trials [default: 1000].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub constants: ConstantArgs,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SymmetryArgs {
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Norm of the start point [default: 100].
    #[arg(long)]
    pub start_norm: Option<f64>,
    /// Trials per batch [default: 200].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Applicable runs required before stopping [default: 50].
    #[arg(long)]
    pub min_applicable: Option<usize>,
    /// Cap on the total number of runs [default: 2000].
    #[arg(long)]
    pub max_trials: Option<usize>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub constants: ConstantArgs,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LemmasArgs {
    /// Lemma to fuzz: empty-ball, flatness, radial-progress or all [default: all].
    #[arg(long)]
    pub lemma: Option<String>,
    /// Dimension [default: 2].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Valid instances per lemma [default: 100000].
    #[arg(long)]
    pub instances: Option<usize>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Keys accepted in every config file besides the command's own.
const GLOBAL_KEYS: [&str; 2] = ["out-dir", "workers"];

/// Global settings after resolution.
#[derive(Clone, Debug, Serialize)]
pub struct Globals {
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Parsed config file as a flat JSON object.
pub fn load_file(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
    match serde_json::to_value(table) {
        Ok(Value::Object(map)) => Ok(map),
        _ => Err(CliError::Config(format!("config {} is not a table", path.display()))),
    }
}

pub fn resolve_globals(cli: &Cli, file: &Map<String, Value>) -> Result<Globals, CliError> {
    let file_out = match file.get("out-dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => return Err(CliError::Config(format!("out-dir must be a string, got {v}"))),
    };
    let file_workers = match file.get("workers") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| CliError::Config(format!("workers must be a non-negative integer, got {v}")))?
                as usize,
        ),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or(file_out)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let workers = cli.workers.or(file_workers).unwrap_or(0);
    Ok(Globals { out_dir, workers })
}

/// Fills every unset flag of `flags` from `file`. Unknown file keys are a
/// config error.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: &Map<String, Value>) -> Result<T, CliError> {
    let mut value = serde_json::to_value(flags).expect("arguments serialize");
    let obj = value.as_object_mut().expect("arguments are structs");
    for (key, v) in file {
        match obj.get_mut(key) {
            Some(slot) if slot.is_null() => *slot = v.clone(),
            Some(_) => {}
            None if GLOBAL_KEYS.contains(&key.as_str()) => {}
            None => return Err(CliError::Config(format!("unknown config key {key:?}"))),
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config value: {e}")))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

pub fn check_dim(dim: usize) -> Result<usize, CliError> {
    check(dim >= 2, || format!("dim must be at least 2, got {dim}"))?;
    Ok(dim)
}

pub fn check_positive(name: &str, v: f64) -> Result<f64, CliError> {
    check(v > 0.0 && v.is_finite(), || format!("{name} must be positive and finite, got {v}"))?;
    Ok(v)
}

pub fn check_trials(trials: usize, min: usize) -> Result<usize, CliError> {
    check(trials >= min, || format!("trials must be at least {min}, got {trials}"))?;
    Ok(trials)
}

pub fn check_epsilon(eps: f64) -> Result<f64, CliError> {
    check(eps > 0.0 && eps < 0.5, || format!("epsilon must lie in (0, 1/2), got {eps}"))?;
    Ok(eps)
}

/// Sampling parameters with defaults filled.
#[derive(Clone, Debug, Serialize)]
pub struct SampleConfig {
    pub dim: usize,
    pub radius: f64,
    pub seed: u64,
}

impl SampleArgs {
    pub fn resolve(&self) -> Result<SampleConfig, CliError> {
        Ok(SampleConfig {
            dim: check_dim(self.dim.unwrap_or(2))?,
            radius: check_positive("radius", self.radius.unwrap_or(30.0))?,
            seed: self.seed.unwrap_or(0),
        })
    }
}

impl ConstantArgs {
    pub fn resolve(&self, dim: usize) -> Result<Constants, CliError> {
        let d = Constants::for_dim(dim);
        let c = Constants {
            kappa: self.kappa.unwrap_or(d.kappa),
            lambda: self.lambda.unwrap_or(d.lambda),
            delta: self.delta.unwrap_or(d.delta),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
        };
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}
