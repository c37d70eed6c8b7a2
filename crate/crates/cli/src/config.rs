//! Experiment configuration, read from JSON. Every section and field is
//! optional; omitted values take the defaults documented on each field.

use std::path::{Path, PathBuf};

use bdlp_core::{Field, ModelParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model constants; defaults to the canonical parameter set.
    pub model: ModelParams,
    pub initial: InitialCondition,
    pub solver: SolverSettings,
    pub ibm: IbmSettings,
    pub truncation: TruncationSettings,
}

/// Initial density on the model grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    Constant { value: f64 },
    /// `mean (1 + amplitude sin(2 pi mode x / L))`.
    Sinusoid { mean: f64, amplitude: f64, mode: u32 },
    /// One nonnegative value per grid cell, whitespace or comma separated;
    /// `#` starts a comment. Relative paths resolve against the config file.
    Table { path: PathBuf },
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self::Constant { value: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub restart_every: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            t_end: 0.2,
            dt: 1e-3,
            tol: 1e-8,
            max_iter: 200,
            restart_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IbmSettings {
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Density bins; `0` means `L / 40`-wide bins.
    pub bins: usize,
    pub separation_bins: usize,
    pub max_separation: f64,
    /// Step of the reference solution in `sweep`.
    pub reference_dt: f64,
}

impl Default for IbmSettings {
    fn default() -> Self {
        Self {
            t_end: 0.05,
            snapshot_times: vec![0.0, 0.025, 0.05],
            eps_list: vec![0.4, 0.2, 0.1],
            replicates: 200,
            seed: 1,
            bins: 0,
            separation_bins: 12,
            max_separation: 3.0,
            reference_dt: 1e-4,
        }
    }
}

impl IbmSettings {
    pub fn bin_count(&self) -> usize {
        if self.bins == 0 {
            40
        } else {
            self.bins
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSettings {
    /// Highest configuration size `N`.
    pub max_level: usize,
    /// Sites of the operator grid.
    pub sites: usize,
    pub lambda: f64,
    pub eps_list: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for TruncationSettings {
    fn default() -> Self {
        Self {
            max_level: 3,
            sites: 16,
            lambda: 1.0,
            eps_list: vec![1.0, 0.1, 0.01],
            samples: 100,
            seed: 7,
        }
    }
}

/// A parsed configuration and the hash of its source bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_bytes(&bytes, base)
    }

    pub fn from_bytes(bytes: &[u8], base_dir: PathBuf) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            serde_json::from_slice(bytes).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        config.model.check().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            config,
            sha256: crate::output::sha256_hex(bytes),
            base_dir,
        })
    }

    /// The defaults, hashed as their pretty JSON serialization.
    pub fn defaults() -> Self {
        let config = ExperimentConfig::default();
        let bytes = serde_json::to_vec_pretty(&config).expect("serializable");
        Self {
            config,
            sha256: crate::output::sha256_hex(&bytes),
            base_dir: PathBuf::new(),
        }
    }

    pub fn initial_field(&self) -> Result<Field, CliError> {
        let m = &self.config.model;
        let field = match &self.config.initial {
            InitialCondition::Constant { value } => Field::constant(*value, m.domain_length, m.grid_size),
            InitialCondition::Sinusoid { mean, amplitude, mode } => {
                Field::sinusoid(*mean, *amplitude, *mode, m.domain_length, m.grid_size)
            }
            InitialCondition::Table { path } => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let values = parse_table(&text)?;
                if values.len() != m.grid_size {
                    return Err(CliError::Config(format!(
                        "table has {} values, grid has {} cells",
                        values.len(),
                        m.grid_size
                    )));
                }
                Field::new(values, m.domain_length)
            }
        };
        field.map_err(|e| CliError::Config(e.to_string()))
    }
}

fn parse_table(text: &str) -> Result<Vec<f64>, CliError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad table value {t:?}: {e}")))
        })
        .collect()
}
