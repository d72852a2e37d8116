use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use piecon::ModelConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[cfg(test)]
const SCHEMA: &str = include_str!("../run_config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.05
}

/// Model hyperparameters plus inputs, outputs, seeds and sweep grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub sweep_windows: Vec<usize>,
    pub sweep_intervals: Vec<usize>,
    pub threads: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunKeys {
    #[serde(default)]
    edges: Option<PathBuf>,
    #[serde(default)]
    features: Option<PathBuf>,
    #[serde(default)]
    labels: Option<PathBuf>,
    #[serde(default)]
    synth: Option<SynthSpec>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    sweep_windows: Option<Vec<usize>>,
    #[serde(default)]
    sweep_intervals: Option<Vec<usize>>,
    #[serde(default)]
    threads: Option<usize>,
}

const RUN_KEYS: [&str; 9] = [
    "edges",
    "features",
    "labels",
    "synth",
    "out",
    "seeds",
    "sweep_windows",
    "sweep_intervals",
    "threads",
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            edges: None,
            features: None,
            labels: None,
            synth: None,
            out: PathBuf::from("out"),
            seeds: vec![0],
            sweep_windows: (5..=100).step_by(5).collect(),
            sweep_intervals: (0..=20).collect(),
            threads: None,
        }
    }
}

impl RunConfig {
    /// Parses a flat JSON object: run keys are taken out, everything else
    /// must be a [`ModelConfig`] field.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut object: Map<String, Value> = serde_json::from_str(text).context("config is not a JSON object")?;
        let mut run = Map::new();
        for key in RUN_KEYS {
            if let Some(v) = object.remove(key) {
                run.insert(key.to_string(), v);
            }
        }
        let keys: RunKeys = serde_json::from_value(Value::Object(run)).context("invalid run settings")?;
        let model: ModelConfig = serde_json::from_value(Value::Object(object)).context("invalid model settings")?;
        let defaults = RunConfig::default();
        Ok(RunConfig {
            model,
            edges: keys.edges,
            features: keys.features,
            labels: keys.labels,
            synth: keys.synth,
            out: keys.out.unwrap_or(defaults.out),
            seeds: keys.seeds.unwrap_or(defaults.seeds),
            sweep_windows: keys.sweep_windows.unwrap_or(defaults.sweep_windows),
            sweep_intervals: keys.sweep_intervals.unwrap_or(defaults.sweep_intervals),
            threads: keys.threads,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Sets one model field from `key=value`; the value is read as JSON,
    /// falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, raw)) = assignment.split_once('=') else {
            bail!("expected KEY=VALUE, got `{assignment}`");
        };
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set_value(key.trim(), value)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> Result<()> {
        let Value::Object(mut object) = serde_json::to_value(&self.model)? else {
            unreachable!("ModelConfig serializes to an object");
        };
        if !object.contains_key(key) {
            bail!("unknown model field `{key}`");
        }
        object.insert(key.to_string(), value);
        self.model = serde_json::from_value(Value::Object(object)).with_context(|| format!("invalid value for `{key}`"))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.seeds.is_empty() {
            bail!("`seeds` must not be empty");
        }
        if let Some(s) = &self.synth {
            if !(0.0..=1.0).contains(&s.noise) {
                bail!("`synth.noise` must lie in [0, 1], got {}", s.noise);
            }
        }
        Ok(())
    }
}

/// Value list for grid flags; see [`parse_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<usize>);

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_grid(s).map(Grid)
    }
}

/// Comma-separated values; an item may be an inclusive range `a..=b` with
/// an optional step as `a..=b:s`.
pub fn parse_grid(text: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, rest)) = item.split_once("..=") {
            let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("`{item}`: {e}"));
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if step == 0 || a > b {
                return Err(format!("`{item}` is an empty range"));
            }
            out.extend((a..=b).step_by(step));
        } else {
            out.push(item.parse().map_err(|e| format!("`{item}`: {e}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}
