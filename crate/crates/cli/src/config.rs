//! Run configuration for `simulate`: a JSON file with a schema version,
//! overridden field by field by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use toom_core::estimators::default_max_lag;
use toom_core::lattice::TimeMode;
use toom_core::protocol::InterfacePlan;
use toom_core::ModelParams;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Fast,
}

impl From<Mode> for TimeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => TimeMode::Exact,
            Mode::Fast => TimeMode::Fast,
        }
    }
}

/// Fully resolved configuration of an interface run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub lambda: f64,
    pub n: usize,
    pub seed: u64,
    pub warmup_time: u64,
    pub sample_period: u64,
    pub num_samples: u64,
    pub max_lag: usize,
    pub block_spacing: u64,
    /// Words of 64 lanes.
    pub replicas: usize,
    pub batches: usize,
    pub init_density: f64,
    pub record_samples: bool,
    pub output: PathBuf,
    pub mode: Mode,
    /// Seconds of wall-clock time between checkpoints.
    pub checkpoint_interval: f64,
}

/// Any subset of the configuration, from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct PartialRunConfig {
    #[arg(long)]
    pub schema_version: Option<u32>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Default n²/2.
    #[arg(long)]
    pub warmup_time: Option<u64>,
    /// Default n.
    #[arg(long)]
    pub sample_period: Option<u64>,
    /// Sample times per word.
    #[arg(long)]
    pub num_samples: Option<u64>,
    /// Structure-function block length T, default ⌈2 n^{2/3}⌉.
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Default n + T.
    #[arg(long)]
    pub block_spacing: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub init_density: Option<f64>,
    #[arg(long)]
    pub record_samples: Option<bool>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub checkpoint_interval: Option<f64>,
}

impl PartialRunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those of `self`.
    pub fn overlay(self, over: PartialRunConfig) -> Self {
        Self {
            schema_version: over.schema_version.or(self.schema_version),
            lambda: over.lambda.or(self.lambda),
            n: over.n.or(self.n),
            seed: over.seed.or(self.seed),
            warmup_time: over.warmup_time.or(self.warmup_time),
            sample_period: over.sample_period.or(self.sample_period),
            num_samples: over.num_samples.or(self.num_samples),
            max_lag: over.max_lag.or(self.max_lag),
            block_spacing: over.block_spacing.or(self.block_spacing),
            replicas: over.replicas.or(self.replicas),
            batches: over.batches.or(self.batches),
            init_density: over.init_density.or(self.init_density),
            record_samples: over.record_samples.or(self.record_samples),
            output: over.output.or(self.output),
            mode: over.mode.or(self.mode),
            checkpoint_interval: over.checkpoint_interval.or(self.checkpoint_interval),
        }
    }

    pub fn resolve(self) -> CliResult<RunConfig> {
        let missing = |name: &str| CliError::Config(format!("missing required setting `{name}`"));
        let schema_version = self.schema_version.unwrap_or(SCHEMA_VERSION);
        if schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema version {schema_version}, expected {SCHEMA_VERSION}"
            )));
        }
        let n = self.n.ok_or_else(|| missing("n"))?;
        let max_lag = self.max_lag.unwrap_or_else(|| default_max_lag(n));
        let cfg = RunConfig {
            schema_version,
            lambda: self.lambda.ok_or_else(|| missing("lambda"))?,
            n,
            seed: self.seed.ok_or_else(|| missing("seed"))?,
            warmup_time: self.warmup_time.unwrap_or((n as u64 * n as u64) / 2),
            sample_period: self.sample_period.unwrap_or(n as u64),
            num_samples: self.num_samples.ok_or_else(|| missing("num_samples"))?,
            max_lag,
            block_spacing: self.block_spacing.unwrap_or((n + max_lag) as u64),
            replicas: self.replicas.unwrap_or(1),
            batches: self.batches.unwrap_or(16),
            init_density: self.init_density.unwrap_or(0.5),
            record_samples: self.record_samples.unwrap_or(true),
            output: self.output.ok_or_else(|| missing("output"))?,
            mode: self.mode.unwrap_or(Mode::Exact),
            checkpoint_interval: self.checkpoint_interval.unwrap_or(600.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        ModelParams::new(self.lambda)?;
        if self.max_lag < default_max_lag(self.n) {
            return Err(CliError::Config(format!(
                "max_lag {} is below 2 n^(2/3) = {}",
                self.max_lag,
                default_max_lag(self.n)
            )));
        }
        if self.replicas == 0 {
            return Err(CliError::Config("replicas must be positive".into()));
        }
        if !(self.checkpoint_interval > 0.0) {
            return Err(CliError::Config(
                "checkpoint_interval must be positive".into(),
            ));
        }
        self.plan().validate()?;
        Ok(())
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(self.lambda)?)
    }

    pub fn plan(&self) -> InterfacePlan {
        InterfacePlan {
            n: self.n,
            warmup: self.warmup_time,
            sample_period: self.sample_period,
            samples: self.num_samples,
            max_lag: self.max_lag,
            block_spacing: self.block_spacing,
            batches: self.batches,
            record_samples: self.record_samples,
            init_density: self.init_density,
        }
    }
}
