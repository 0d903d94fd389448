//! First and second variations of the discrete limit flow.
//!
//! The variations are the exact derivatives of the stepping map along a stored
//! path, so for a step of the scheme they satisfy the linearized equations
//! `∂ζ + M_u(ζ)·∇θ + M_u(θ)·∇ζ = κΔζ` and its second-order analogue in the
//! same discretization.

use std::sync::Arc;

use super::{LimitModel, LimitState, LimitStepper};
use crate::error::{invalid, Result};
use crate::noise::NoiseSampler;
use crate::spectral::SpectralScalar;

/// A stored limit trajectory together with the increments that drove it.
#[derive(Clone)]
pub struct ThetaPath {
    pub model: Arc<LimitModel>,
    pub states: Vec<LimitState>,
    pub increments: Vec<Option<SpectralScalar>>,
}

impl ThetaPath {
    /// Runs `n_steps` from `start`, recording states and increments.
    pub fn record(model: &Arc<LimitModel>, start: LimitState, n_steps: usize, noise: Option<(&NoiseSampler, u64)>) -> Result<Self> {
        let mut st = LimitStepper::new(model);
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut increments = Vec::with_capacity(n_steps);
        states.push(start);
        for i in 0..n_steps {
            let dw = match noise {
                Some((s, traj)) => Some(s.sample_increment(model.cfg.dt, i as u64, traj)?),
                None => None,
            };
            let next = st.step(&states[i], dw.as_ref())?;
            states.push(next);
            increments.push(dw);
        }
        Ok(ThetaPath { model: model.clone(), states, increments })
    }

    /// Reruns the stored increments from a different state at index `from`.
    pub fn replay(&self, from: usize, start: &SpectralScalar, to: usize) -> Result<SpectralScalar> {
        let mut st = LimitStepper::new(&self.model);
        let mut s = LimitState { theta: start.clone(), time: self.states[from].time };
        for i in from..to {
            s = st.step(&s, self.increments[i].as_ref())?;
        }
        Ok(s.theta)
    }

    pub fn dt(&self) -> f64 {
        self.model.cfg.dt
    }

    /// Step index of time `t`, which must lie on the stored grid of times.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let t0 = self.states[0].time;
        let x = (t - t0) / self.dt();
        let i = x.round();
        if !(i >= 0.0) || (x - i).abs() > 1e-6 || i as usize >= self.states.len() {
            return invalid(format!(
                "time {t} is not covered by the stored path [{t0}, {}]",
                self.states.last().map(|s| s.time).unwrap_or(t0)
            ));
        }
        Ok(i as usize)
    }

    fn span(&self, s: f64, t: f64) -> Result<(usize, usize)> {
        let (i, j) = (self.index_of(s)?, self.index_of(t)?);
        if i > j {
            return invalid(format!("variation needs s <= t, got s = {s}, t = {t}"));
        }
        Ok((i, j))
    }
}

/// `J_{s,t} ξ`: the derivative of the flow from time `s` to `t` applied to `ξ`.
pub fn first_variation(path: &ThetaPath, xi: &SpectralScalar, s: f64, t: f64) -> Result<SpectralScalar> {
    let (i, j) = path.span(s, t)?;
    let mut st = LimitStepper::new(&path.model);
    let mut z = xi.clone();
    for n in i..j {
        z = st.tangent(&path.states[n].theta, &z);
    }
    Ok(z)
}

/// `J^{(2)}_{s,t}(ξ, ξ')`: the second derivative of the flow from `s` to `t`.
pub fn second_variation(path: &ThetaPath, xi: &SpectralScalar, xi2: &SpectralScalar, s: f64, t: f64) -> Result<SpectralScalar> {
    let (i, j) = path.span(s, t)?;
    let mut st = LimitStepper::new(&path.model);
    let mut z1 = xi.clone();
    let mut z2 = xi2.clone();
    let mut k = SpectralScalar::zeros(xi.grid());
    for n in i..j {
        let th = &path.states[n].theta;
        let nk = st.second_tangent(th, &z1, &z2, &k);
        z1 = st.tangent(th, &z1);
        z2 = st.tangent(th, &z2);
        k = nk;
    }
    Ok(k)
}
