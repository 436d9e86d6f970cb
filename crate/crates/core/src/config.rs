//! Run configuration, stored as a versioned TOML document.
//!
//! Keys are namespaced (`contract.fee_rate`, `grids.g.count`, ...) and may
//! be written either as dotted keys or as tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contract::{ContractTerms, MarketModel};
use crate::error::{Error, Result};
use crate::reset::BbRateMode;
use crate::simulation::{SimPlan, DEFAULT_PATHS, DEFAULT_SEED};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "GMIB_ENGINE_THREADS";

/// `count` equidistant values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn single(value: f64) -> Self {
        GridSpec {
            start: value,
            stop: value,
            count: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let step = (self.stop - self.start) / (n - 1) as f64;
                (0..n).map(|i| self.start + i as f64 * step).collect()
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Domain(format!("grid `{name}` must have count >= 1 and finite ends")));
        }
        if self.count > 1 && self.stop <= self.start {
            return Err(Error::Domain(format!("grid `{name}` must have stop > start")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub n_paths: usize,
    pub seed: u64,
    /// Falls back to `GMIB_ENGINE_THREADS`, then the machine's parallelism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub antithetic: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            n_paths: DEFAULT_PATHS,
            seed: DEFAULT_SEED,
            workers: None,
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub g: GridSpec,
    pub c: GridSpec,
    pub rate: GridSpec,
    pub sigma: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            g: GridSpec {
                start: 0.05,
                stop: 0.10,
                count: 51,
            },
            c: GridSpec {
                start: 0.005,
                stop: 0.01,
                count: 6,
            },
            rate: GridSpec {
                start: 0.0,
                stop: 0.15,
                count: 16,
            },
            sigma: vec![0.02, 0.10, 0.20],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResetSettings {
    pub bb_rate_mode: BbRateMode,
    pub charge_extension_fees: bool,
}

impl Default for ResetSettings {
    fn default() -> Self {
        ResetSettings {
            bb_rate_mode: BbRateMode::AtExtensionRate,
            charge_extension_fees: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Also write auxiliary plotting data (deferral curves, trajectories).
    pub plot_data: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            dir: PathBuf::from("out"),
            plot_data: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub contract: ContractTerms,
    pub market: MarketModel,
    pub sim: SimSettings,
    pub grids: Grids,
    pub reset: ResetSettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            contract: ContractTerms::default(),
            market: MarketModel::default(),
            sim: SimSettings::default(),
            grids: Grids::default(),
            reset: ResetSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Parse(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.contract.validate()?;
        self.market.validate()?;
        self.grids.g.validate("g")?;
        self.grids.c.validate("c")?;
        self.grids.rate.validate("rate")?;
        if self.grids.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Domain("volatilities must be finite and >= 0".into()));
        }
        self.plan().validate()
    }

    /// Worker count: explicit setting, then the environment, then all cores.
    pub fn resolved_workers(&self) -> usize {
        self.sim
            .workers
            .or_else(|| {
                std::env::var(THREADS_ENV)
                    .ok()
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .filter(|&n| n >= 1)
            })
            .unwrap_or_else(|| SimPlan::default().n_workers)
    }

    pub fn plan(&self) -> SimPlan {
        SimPlan {
            n_paths: self.sim.n_paths,
            master_seed: self.sim.seed,
            n_workers: self.resolved_workers(),
            antithetic: self.sim.antithetic,
        }
    }
}
