//! Run configuration files.
//!
//! A run is described by one TOML document with a section per subsystem.
//! Unknown keys are rejected, omitted optional keys take their defaults, and
//! [`RunConfig::resolved_toml`] writes the fully expanded configuration back
//! out so a run can be reproduced from its output directory alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{DomainSpec, Grid, GridSpec};
use crate::materials::{LayerMaterials, MaterialError, MaterialLibrary};
use crate::parallel::ExecPlan;
use crate::runner::RunnerConfig;
use crate::solver::SolverConfig;
use crate::source::SourceSpec;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CRYOCELL_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value at `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("materials: {0}")]
    Materials(#[from] MaterialError),
}

fn invalid(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulate,
    Bench,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Csv,
    Vtk,
}

fn default_formats() -> Vec<SnapshotFormat> {
    vec![SnapshotFormat::Csv, SnapshotFormat::Vtk]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_formats")]
    pub snapshot_formats: Vec<SnapshotFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            snapshot_formats: default_formats(),
        }
    }
}

fn default_worker_counts() -> Vec<usize> {
    vec![1, 2, 4]
}
fn default_bench_steps() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_worker_counts")]
    pub worker_counts: Vec<usize>,
    #[serde(default = "default_bench_steps")]
    pub steps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            worker_counts: default_worker_counts(),
            steps: default_bench_steps(),
        }
    }
}

fn default_t0() -> f64 {
    4.2
}
fn default_ceiling() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    /// Material file, relative to the configuration file.
    pub materials_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_t0")]
    pub initial_temperature: f64,
    /// Highest temperature the material tables must cover.
    #[serde(default = "default_ceiling")]
    pub temperature_ceiling: f64,
    pub t_end: f64,
    pub domain: DomainSpec,
    pub grid: GridSpec,
    pub source: SourceSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub runner: RunnerConfig,
    #[serde(default)]
    pub exec: ExecPlan,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl RunConfig {
    /// Parses TOML text; relative paths are resolved against `base`.
    pub fn parse_str(text: &str, origin: &Path, base: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if cfg.materials_file.is_relative() {
            cfg.materials_file = base.join(&cfg.materials_file);
        }
        if let Some(out) = &cfg.output_dir {
            if out.is_relative() {
                cfg.output_dir = Some(base.join(out));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let base = std::fs::canonicalize(&base).unwrap_or(base);
        Self::parse_str(&text, path, &base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.domain.validate().map_err(|e| invalid("domain", e))?;
        Grid::build(&self.domain, &self.grid).map_err(|e| invalid("grid", e))?;
        self.source.validate().map_err(|e| match e {
            crate::source::SourceError::Invalid { field, reason } => invalid(&format!("source.{field}"), reason),
            other => invalid("source", other),
        })?;
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        self.runner.detector.validate().map_err(|e| invalid("runner.detector", e))?;
        if self.exec.workers == 0 {
            return Err(invalid("exec.workers", "must be at least 1"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid("t_end", "must be positive"));
        }
        if !(self.initial_temperature.is_finite() && self.initial_temperature >= 0.0) {
            return Err(invalid("initial_temperature", "must be a non-negative temperature"));
        }
        if !(self.temperature_ceiling > self.initial_temperature) {
            return Err(invalid("temperature_ceiling", "must exceed initial_temperature"));
        }
        if self.bench.worker_counts.is_empty() || self.bench.worker_counts.contains(&0) {
            return Err(invalid("bench.worker_counts", "must be a non-empty list of positive counts"));
        }
        if self.bench.steps == 0 {
            return Err(invalid("bench.steps", "must be at least 1"));
        }
        if !self.materials_file.is_file() {
            return Err(invalid(
                "materials_file",
                format!("{} does not exist", self.materials_file.display()),
            ));
        }
        Ok(())
    }

    /// Fills in the output directory: explicit value, then the environment,
    /// then `./out`.
    pub fn resolve_output_dir(&mut self) {
        if self.output_dir.is_none() {
            let dir = std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out"));
            let dir = if dir.is_relative() {
                std::env::current_dir().map(|c| c.join(&dir)).unwrap_or(dir)
            } else {
                dir
            };
            self.output_dir = Some(dir);
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Loads the per-layer materials and checks they cover the run's range.
    pub fn load_materials(&self) -> Result<LayerMaterials, ConfigError> {
        let library = MaterialLibrary::load(&self.materials_file)?;
        let layers = LayerMaterials::from_library(&library, &self.domain.layer_materials)?;
        for m in layers.iter() {
            m.check_coverage(self.initial_temperature, self.temperature_ceiling)?;
        }
        let src = layers.layer(self.domain.source_layer);
        if src.resistivity.is_none() {
            return Err(MaterialError::MissingResistivity {
                material: src.name.clone(),
            }
            .into());
        }
        Ok(layers)
    }

    /// The configuration with every default written out.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Short hash of the resolved configuration, stamped into output headers.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.resolved_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
