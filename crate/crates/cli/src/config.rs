//! Layered configuration: built-in defaults, then the TOML file, then flags.

use std::path::Path;

use hohmm::{Family, ModelConfig, RunConfig};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::args::{ModelArgs, RunArgs};
use crate::{CliError, Result};

pub const SEED_ENV: &str = "HOHMM_SEED";
pub const DEFAULT_STATES: usize = 10;
pub const DEFAULT_MAX_LAG: usize = 5;

/// Contents of a `--config` file. Both tables are optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: toml::Table,
    pub run: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelOverrides {
    pub family: Option<Family>,
    pub n_states: Option<usize>,
    pub max_lag: Option<usize>,
}

impl From<&ModelArgs> for ModelOverrides {
    fn from(a: &ModelArgs) -> Self {
        ModelOverrides { family: a.family, n_states: a.max_states, max_lag: a.max_lag }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub total: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub stage1: Option<usize>,
    pub hdp_hmm_mode: bool,
}

impl From<&RunArgs> for RunOverrides {
    fn from(a: &RunArgs) -> Self {
        RunOverrides { total: a.iters, burnin: a.burnin, thin: a.thin, stage1: a.stage1, hdp_hmm_mode: false }
    }
}

fn to_json(table: &toml::Table, name: &str) -> Result<Map<String, Value>> {
    match serde_json::to_value(table) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(CliError::Usage(format!("[{name}] must be a table of plain values"))),
    }
}

fn get<T: serde::de::DeserializeOwned>(m: &Map<String, Value>, key: &str, table: &str) -> Result<Option<T>> {
    m.get(key)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("[{table}] {key}: {e}"))))
        .transpose()
}

fn merge<T: serde::Serialize + serde::de::DeserializeOwned>(
    base: &T,
    over: Map<String, Value>,
    table: &str,
) -> Result<T> {
    let Value::Object(mut m) = serde_json::to_value(base).map_err(hohmm::Error::from)? else {
        unreachable!("configs serialize to objects")
    };
    m.extend(over);
    serde_json::from_value(Value::Object(m)).map_err(|e| CliError::Usage(format!("[{table}]: {e}")))
}

/// Data-dependent model defaults, overlaid by `[model]`, then by flags.
pub fn resolve_model(file: &FileConfig, flags: &ModelOverrides, y: &[f64]) -> Result<ModelConfig> {
    let mut table = to_json(&file.model, "model")?;
    let family = match flags.family {
        Some(f) => f,
        None => get(&table, "family", "model")?.unwrap_or(Family::Normal),
    };
    let n_states = match flags.n_states {
        Some(c) => c,
        None => get(&table, "C", "model")?.unwrap_or(DEFAULT_STATES),
    };
    let max_lag = match flags.max_lag {
        Some(q) => q,
        None => get(&table, "q", "model")?.unwrap_or(DEFAULT_MAX_LAG),
    };
    let mut base = ModelConfig::from_data(family, n_states, max_lag, y);
    if let Some(s) = get::<usize>(&table, "S", "model")? {
        base.n_components = s;
        if family == Family::Tmix {
            base.alpha_eta = s as f64;
        }
    }
    table.insert("family".into(), serde_json::to_value(family).map_err(hohmm::Error::from)?);
    table.insert("C".into(), n_states.into());
    table.insert("q".into(), max_lag.into());
    let cfg: ModelConfig = merge(&base, table, "model")?;
    cfg.check()?;
    Ok(cfg)
}

/// Run lengths: burn-in defaults to 40% and lag selection to 60% of the total.
pub fn resolve_run(file: &FileConfig, flags: &RunOverrides, seed: u64) -> Result<RunConfig> {
    let mut table = to_json(&file.run, "run")?;
    let defaults = RunConfig::default();
    let total = match flags.total {
        Some(t) => t,
        None => get(&table, "total", "run")?.unwrap_or(defaults.total),
    };
    let burnin = match flags.burnin {
        Some(b) => b,
        None => get(&table, "burnin", "run")?.unwrap_or(total * 2 / 5),
    };
    let stage1 = match flags.stage1 {
        Some(s) => s,
        None => get(&table, "stage1", "run")?.unwrap_or(total * 3 / 5),
    };
    let thin = match flags.thin {
        Some(t) => t,
        None => get(&table, "thin", "run")?.unwrap_or(defaults.thin),
    };
    table.insert("total".into(), total.into());
    table.insert("burnin".into(), burnin.into());
    table.insert("stage1".into(), stage1.into());
    table.insert("thin".into(), thin.into());
    table.insert("seed".into(), seed.into());
    if flags.hdp_hmm_mode {
        table.insert("hdp_hmm_mode".into(), true.into());
    }
    let run: RunConfig = merge(&defaults, table, "run")?;
    run.check()?;
    Ok(run)
}

/// `--seed`, else `HOHMM_SEED`, else `[run] seed`, else 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        return v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not a u64 seed")));
    }
    Ok(get(&to_json(&file.run, "run")?, "seed", "run")?.unwrap_or(0))
}
