//! Flat `key = value` config files and the default/file/flag merge.
//!
//! Precedence, lowest to highest: built-in defaults (paper parameters where
//! stated), values from `--config FILE`, then explicit flags. Unknown keys
//! in the file are rejected so typos cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const KNOWN_KEYS: [&str; 11] = [
    "agents",
    "history_bits",
    "strategies",
    "multiplier",
    "seed",
    "steps",
    "samples",
    "measure_at",
    "p0",
    "workers",
    "out_dir",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got {:?}",
                    path.display(),
                    i + 1,
                    line
                );
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!(
                    "{}:{}: unknown config key {:?} (known keys: {})",
                    path.display(),
                    i + 1,
                    key,
                    KNOWN_KEYS.join(", ")
                );
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}: cannot parse {raw:?}: {e}"),
            },
        }
    }
}

/// Fully resolved scalar settings shared by all subcommands.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub agents: usize,
    pub history_bits: u32,
    pub strategies: usize,
    pub multiplier: f64,
    pub seed: u64,
    pub steps: usize,
    pub samples: usize,
    /// Defaults to `steps` when neither file nor flag sets it.
    pub measure_at: usize,
    pub p0: f64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

/// Desk-scale defaults; paper parameters where the reference runs state
/// them (m = 2, s = 2, initial wealth five times the initial price).
pub struct Defaults {
    pub agents: usize,
    pub steps: usize,
    pub samples: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            agents: 1000,
            steps: 2000,
            samples: 100,
        }
    }
}

/// Flag values, all optional; `None` defers to the file and defaults.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub agents: Option<usize>,
    pub history_bits: Option<u32>,
    pub strategies: Option<usize>,
    pub multiplier: Option<f64>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub measure_at: Option<usize>,
    pub p0: Option<f64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

pub fn resolve(defaults: Defaults, file: &FileConfig, flags: &Overrides) -> Result<Resolved> {
    let agents = flags
        .agents
        .or(file.parsed("agents")?)
        .unwrap_or(defaults.agents);
    let history_bits = flags
        .history_bits
        .or(file.parsed("history_bits")?)
        .unwrap_or(2);
    let strategies = flags.strategies.or(file.parsed("strategies")?).unwrap_or(2);
    let multiplier = flags
        .multiplier
        .or(file.parsed("multiplier")?)
        .unwrap_or(5.0);
    let seed = flags.seed.or(file.parsed("seed")?).unwrap_or(0);
    let steps = flags
        .steps
        .or(file.parsed("steps")?)
        .unwrap_or(defaults.steps);
    let samples = flags
        .samples
        .or(file.parsed("samples")?)
        .unwrap_or(defaults.samples);
    let measure_at = flags
        .measure_at
        .or(file.parsed("measure_at")?)
        .unwrap_or(steps);
    let p0 = flags.p0.or(file.parsed("p0")?).unwrap_or(1000.0);
    let workers = flags.workers.or(file.parsed("workers")?).unwrap_or(0);
    let out_dir = flags
        .out_dir
        .clone()
        .or(file.parsed::<PathBuf>("out_dir")?)
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved {
        agents,
        history_bits,
        strategies,
        multiplier,
        seed,
        steps,
        samples,
        measure_at,
        p0,
        workers,
        out_dir,
    })
}
