//! Experiment configuration in TOML.
//!
//! Top-level keys describe the run; `[physics]`, `[step]`, `[noise]`, `[initial]`,
//! `[metric]`, `[convergence]` and `[stationary]` hold the component settings. Every
//! field has a default, so an empty file is a valid configuration. The only
//! environment override is `MSLAB_OUT` for the output directory.

use serde::{Deserialize, Serialize};

use crate::dynamics::{EnsembleSpec, InitialSampler, StepConfig, SystemKind, VelocityInit};
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceSpec, StationarySpec};
use crate::metrics::MetricParams;
use crate::noise::{NoiseConfig, NoiseEntry};
use crate::spectral::PhysParams;

pub const OUT_ENV: &str = "MSLAB_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub grid_n: usize,
    /// Keys the noise and the random initial data.
    pub seed: u64,
    pub horizon: f64,
    pub n_traj: usize,
    pub record_every: usize,
    /// Exponent of the recorded `L^p` norm.
    pub lp: f64,
    pub output_dir: String,
    pub physics: PhysParams,
    pub step: StepConfig,
    pub noise: NoiseSection,
    pub initial: InitialSpec,
    pub velocity_init: VelocityInit,
    pub metric: MetricSection,
    pub convergence: ConvergenceSection,
    pub stationary: StationarySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub entries: Vec<NoiseEntry>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { entries: NoiseConfig::unit_axes(0.05, 0).entries }
    }
}

/// Serializable initial-data choice; `snapshot` reads the temperature from a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    SingleMode { k: [i32; 3], parity: u8, amplitude: f64 },
    Gaussian { radius: f64, amplitude: f64 },
    Snapshot { path: String },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Gaussian { radius: 2.0, amplitude: 0.1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// Weight exponent; `None` selects the default policy.
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub eps_delta: Vec<[f64; 2]>,
    pub p: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection { eps_delta: vec![[1e-1, 1e-1], [1e-2, 1e-2], [1e-3, 1e-3]], p: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySection {
    pub burn_in: Option<f64>,
    pub n_samples: usize,
    pub eps_delta: Vec<[f64; 2]>,
}

impl Default for StationarySection {
    fn default() -> Self {
        StationarySection { burn_in: None, n_samples: 128, eps_delta: vec![[1e-1, 1e-1], [1e-2, 1e-2]] }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemKind::Limit,
            grid_n: 8,
            seed: 0,
            horizon: 1.0,
            n_traj: 8,
            record_every: 10,
            lp: 3.0,
            output_dir: "out".into(),
            physics: PhysParams::default(),
            step: StepConfig::new(4e-3),
            noise: NoiseSection::default(),
            initial: InitialSpec::default(),
            velocity_init: VelocityInit::Matched,
            metric: MetricSection::default(),
            convergence: ConvergenceSection::default(),
            stationary: StationarySection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validated()?;
        self.step.validate()?;
        self.noise_config()?;
        if self.lp < 1.0 {
            return Err(Error::InvalidArgument(format!("lp must be >= 1, got {}", self.lp)));
        }
        if let Some(eta) = self.metric.eta {
            MetricParams::new(eta)?;
        }
        Ok(())
    }

    pub fn noise_config(&self) -> Result<NoiseConfig> {
        NoiseConfig::new(self.noise.entries.clone(), self.seed)
    }

    pub fn metric_params(&self) -> Result<MetricParams> {
        match self.metric.eta {
            Some(eta) => MetricParams::new(eta),
            None => Ok(MetricParams::default_for(&self.physics.validated()?, &self.noise_config()?)),
        }
    }

    /// Output directory, with `MSLAB_OUT` taking precedence.
    pub fn resolved_output_dir(&self) -> String {
        std::env::var(OUT_ENV).unwrap_or_else(|_| self.output_dir.clone())
    }

    pub fn initial_sampler(&self) -> Result<InitialSampler> {
        Ok(match &self.initial {
            InitialSpec::Zero => InitialSampler::Zero,
            InitialSpec::SingleMode { k, parity, amplitude } => {
                InitialSampler::SingleMode { k: *k, parity: *parity, amplitude: *amplitude }
            }
            InitialSpec::Gaussian { radius, amplitude } => {
                InitialSampler::Gaussian { radius: *radius, amplitude: *amplitude, seed: self.seed }
            }
            InitialSpec::Snapshot { path } => {
                let snap = crate::io::read_snapshot(std::path::Path::new(path))?;
                InitialSampler::Fixed(snap.state.theta().clone())
            }
        })
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        Ok(EnsembleSpec {
            system: self.system,
            grid_n: self.grid_n,
            params: self.physics,
            step: self.step,
            noise: self.noise_config()?,
            horizon: self.horizon,
            n_traj: self.n_traj,
            first_traj: 0,
            initial: self.initial_sampler()?,
            velocity_init: self.velocity_init,
            record_every: self.record_every,
            lp: self.lp,
            stop_level: None,
        })
    }
}

fn pairs(v: &[[f64; 2]]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p[0], p[1])).collect()
}

impl ExperimentConfig {
    pub fn convergence_spec(&self) -> Result<ConvergenceSpec> {
        Ok(ConvergenceSpec {
            grid_n: self.grid_n,
            params: self.physics,
            noise: self.noise_config()?,
            step: self.step,
            horizon: self.horizon,
            n_traj: self.n_traj,
            first_traj: 0,
            initial: self.initial_sampler()?,
            velocity_init: self.velocity_init,
            eps_delta: pairs(&self.convergence.eps_delta),
            p: self.convergence.p,
        })
    }

    pub fn stationary_spec(&self) -> Result<StationarySpec> {
        Ok(StationarySpec {
            grid_n: self.grid_n,
            params: self.physics,
            noise: self.noise_config()?,
            step: self.step,
            burn_in: self.stationary.burn_in,
            n_samples: self.stationary.n_samples,
            first_traj: 0,
            initial: self.initial_sampler()?,
            eps_delta: pairs(&self.stationary.eps_delta),
            metric: self.metric_params()?,
        })
    }
}
