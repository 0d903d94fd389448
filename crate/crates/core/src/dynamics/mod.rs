//! Time integration of the full system, the limit equation, the correctors and
//! the variation equations, plus ensemble drivers.

mod corrector;
mod ensemble;
mod full;
mod limit;
pub(crate) mod propagator;
mod variation;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use corrector::{step_corrector, CorrectorModel, CorrectorStage, CorrectorState, CorrectorStepper, StageOne};
pub use ensemble::{
    run_ensemble, EnsembleRecord, EnsembleSpec, InitialSampler, Observation, SystemKind, SystemState, TrajectoryRecord,
    VelocityInit,
};
pub use full::{full_linear_operator, step_full, FullModel, FullStepper};
pub use limit::{step_limit, LimitModel, LimitStepper};
pub use variation::{first_variation, second_variation, ThetaPath};

use crate::error::{invalid, Error, Result};
use crate::spectral::{Grid, SpectralScalar, SpectralVector};

/// Temperature of the limit equation at a given time.
#[derive(Clone, Debug)]
pub struct LimitState {
    pub theta: SpectralScalar,
    pub time: f64,
}

/// Velocity, field and temperature of the full system.
#[derive(Clone, Debug)]
pub struct FullState {
    pub u: SpectralVector,
    pub b: SpectralVector,
    pub theta: SpectralScalar,
    pub time: f64,
}

impl FullState {
    pub fn zeros(grid: &Arc<Grid>, time: f64) -> Self {
        FullState { u: SpectralVector::zeros(grid), b: SpectralVector::zeros(grid), theta: SpectralScalar::zeros(grid), time }
    }
}

/// Time-step settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub dt: f64,
    /// Quadratic transport terms on or off; off gives the linear (Ornstein–Uhlenbeck) dynamics.
    pub advection: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig::new(1e-3)
    }
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        StepConfig { dt, advection: true }
    }

    /// Default step for an `n^3` grid: `1e-3` up to 8³, `5e-4` beyond.
    pub fn default_for(n: usize) -> Self {
        StepConfig::new(if n <= 8 { 1e-3 } else { 5e-4 })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("time step must be positive and finite, got {}", self.dt));
        }
        Ok(())
    }
}

pub(crate) fn check_blowup(ok: bool, step: u64, traj: Option<u64>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::BlowUp { step, traj, tag: None })
    }
}
