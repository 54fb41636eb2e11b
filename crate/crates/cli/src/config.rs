//! Run configuration: a flat TOML file whose keys mirror the command-line
//! flags, overridden flag by flag, then validated with defaults filled in.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use jackflow::Theta;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand; each may also come from `--config`.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Number of particles (rows) on the top level.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Alternative to --theta: β = 2θ.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Horizon: chain time s, or diffusive time t when --epsilon is set; the
    /// SDE horizon; the ensemble variance for `sample`; s for `jack eval`.
    #[arg(long, global = true)]
    pub time: Option<f64>,
    /// Rescale chain output by y = √ε(λ − t/ε), running to s = t/(θε).
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Base SDE step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// SDE proximity threshold δ.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Extra snapshot times, comma separated (same clock as --time).
    #[arg(long, global = true, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Diagram for `jack eval`, e.g. 3,1.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl Overrides {
    /// Flag values win over file values. Giving either of θ, β on the command
    /// line replaces both from the file.
    fn over(self, file: Overrides) -> Overrides {
        let shape_given = self.theta.is_some() || self.beta.is_some();
        Overrides {
            n: self.n.or(file.n),
            theta: if shape_given { self.theta } else { file.theta },
            beta: if shape_given { self.beta } else { file.beta },
            time: self.time.or(file.time),
            epsilon: self.epsilon.or(file.epsilon),
            paths: self.paths.or(file.paths),
            seed: self.seed.or(file.seed),
            dt: self.dt.or(file.dt),
            delta: self.delta.or(file.delta),
            snapshots: self.snapshots.or(file.snapshots),
            lambda: self.lambda.or(file.lambda),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
        }
    }
}

/// Fully resolved configuration, echoed into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub theta: f64,
    pub beta: f64,
    pub time: f64,
    pub epsilon: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub delta: f64,
    pub snapshots: Vec<f64>,
    pub lambda: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_N: usize = 3;
pub const DEFAULT_SEED: u64 = jackflow::verify::DEFAULT_SEED;

impl RunConfig {
    pub fn theta(&self) -> Theta {
        Theta::new(self.theta).expect("validated")
    }
}

fn positive(key: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{key} must be positive and finite, got {v}"))
    }
}

/// Parses key by key so that every error names its key.
pub fn parse_file(text: &str) -> Result<Overrides, String> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| format!("config: {}", e.message()))?;
    for (key, value) in &table {
        let mut one = toml::Table::new();
        one.insert(key.clone(), value.clone());
        toml::Value::Table(one)
            .try_into::<Overrides>()
            .map_err(|e| format!("config key `{key}`: {}", e.message()))?;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| format!("config: {}", e.message()))
}

pub fn load_config(path: Option<&Path>, flags: Overrides) -> Result<RunConfig, String> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            parse_file(&text)?
        }
        None => Overrides::default(),
    };
    resolve(flags.over(file))
}

pub fn resolve(o: Overrides) -> Result<RunConfig, String> {
    let theta = match (o.theta, o.beta) {
        (Some(t), Some(b)) => {
            positive("theta", t)?;
            positive("beta", b)?;
            if (b - 2.0 * t).abs() > 1e-12 * b {
                return Err(format!("beta = {b} and theta = {t} disagree (β = 2θ)"));
            }
            t
        }
        (Some(t), None) => positive("theta", t)?,
        (None, Some(b)) => positive("beta", b)? / 2.0,
        (None, None) => 1.0,
    };
    let n = o.n.unwrap_or(DEFAULT_N);
    if n == 0 {
        return Err("n must be at least 1".into());
    }
    let time = o.time.unwrap_or(1.0);
    if !(time >= 0.0 && time.is_finite()) {
        return Err(format!("time must be nonnegative and finite, got {time}"));
    }
    let paths = o.paths.unwrap_or(1);
    if paths == 0 {
        return Err("paths must be at least 1".into());
    }
    let epsilon = o.epsilon.map(|e| positive("epsilon", e)).transpose()?;
    let mut snapshots = o.snapshots.unwrap_or_default();
    if let Some(s) = snapshots.iter().find(|s| !(**s >= 0.0 && **s <= time)) {
        return Err(format!("snapshots: {s} lies outside [0, time = {time}]"));
    }
    snapshots.sort_by(f64::total_cmp);
    snapshots.dedup();
    Ok(RunConfig {
        n,
        theta,
        beta: 2.0 * theta,
        time,
        epsilon,
        paths,
        seed: o.seed.unwrap_or(DEFAULT_SEED),
        dt: positive("dt", o.dt.unwrap_or(1e-3))?,
        delta: positive(
            "delta",
            o.delta.unwrap_or(jackflow::diffusion::DEFAULT_DELTA),
        )?,
        snapshots,
        lambda: o.lambda,
        out: o.out,
        format: o.format.unwrap_or(Format::Csv),
    })
}
