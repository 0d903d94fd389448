use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FullModel, FullState, FullStepper, LimitModel, LimitState, LimitStepper, StepConfig};
use crate::error::{invalid, Result};
use crate::noise::{canonical_k, NoiseConfig, NoiseSampler};
use crate::spectral::field::VOLUME;
use crate::spectral::grid::Wavevector;
use crate::spectral::{norm, Grid, NormKind, PhysParams, SpectralScalar, SpectralVector, SymbolTable, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Limit,
    Full,
}

/// Initial temperature per trajectory.
#[derive(Clone, Debug)]
pub enum InitialSampler {
    Zero,
    SingleMode { k: Wavevector, parity: u8, amplitude: f64 },
    /// Independent coefficients `amplitude · ξ / |k|` on each real mode with `|k| <= radius`.
    Gaussian { radius: f64, amplitude: f64, seed: u64 },
    Fixed(SpectralScalar),
}

impl InitialSampler {
    pub fn sample(&self, grid: &Arc<Grid>, traj: u64) -> Result<SpectralScalar> {
        match self {
            InitialSampler::Zero => Ok(SpectralScalar::zeros(grid)),
            InitialSampler::SingleMode { k, parity, amplitude } => SpectralScalar::single_mode(grid, *k, *parity, *amplitude),
            InitialSampler::Fixed(f) => {
                if f.grid().n() != grid.n() {
                    return invalid("initial field lives on a different grid");
                }
                Ok(f.clone())
            }
            InitialSampler::Gaussian { radius, amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(traj);
                let mut f = SpectralScalar::zeros(grid);
                for &idx in grid.active() {
                    let k = grid.wavevector(idx);
                    let q = grid.k2()[idx];
                    if canonical_k(k).1 || q > radius * radius {
                        continue;
                    }
                    let s = amplitude / q.sqrt();
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    let c = Complex64::new(0.5 * s * a, -0.5 * s * b);
                    f.coeffs_mut()[idx] = c;
                    f.coeffs_mut()[grid.mirror(idx)] = c.conj();
                }
                Ok(f)
            }
        }
    }
}

/// Initial velocity and field of the full system relative to the temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VelocityInit {
    /// `U(0) = M_u Θ(0)`, `B(0) = M_b Θ(0)`.
    Matched,
    Zero,
    /// Matched data plus a fixed solenoidal offset of the given amplitude in both fields.
    Offset(f64),
}

impl VelocityInit {
    pub fn build(&self, theta: &SpectralScalar, symbols: &SymbolTable) -> Result<(SpectralVector, SpectralVector)> {
        let grid = theta.grid();
        match *self {
            VelocityInit::Zero => Ok((SpectralVector::zeros(grid), SpectralVector::zeros(grid))),
            VelocityInit::Matched => Ok((symbols.velocity(theta), symbols.magnetic(theta))),
            VelocityInit::Offset(a) => {
                let m = |k: Wavevector, par: u8| SpectralScalar::single_mode(grid, k, par, a);
                // Each component is independent of its own coordinate, hence solenoidal.
                let du = SpectralVector::new([m([0, 1, 0], 0)?, m([0, 0, 1], 1)?, m([1, 0, 0], 0)?]);
                let db = SpectralVector::new([m([0, 1, 0], 1)?, m([0, 0, 1], 0)?, m([1, 0, 0], 1)?]);
                Ok((symbols.velocity(theta).add(&du), symbols.magnetic(theta).add(&db)))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum SystemState {
    Limit(LimitState),
    Full(FullState),
}

impl SystemState {
    pub fn theta(&self) -> &SpectralScalar {
        match self {
            SystemState::Limit(s) => &s.theta,
            SystemState::Full(s) => &s.theta,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            SystemState::Limit(s) => s.time,
            SystemState::Full(s) => s.time,
        }
    }
}

/// Ensemble run description.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub system: SystemKind,
    pub grid_n: usize,
    pub params: PhysParams,
    pub step: StepConfig,
    pub noise: NoiseConfig,
    pub horizon: f64,
    pub n_traj: usize,
    /// Trajectory ids are `first_traj .. first_traj + n_traj`; equal ids share noise paths.
    pub first_traj: u64,
    pub initial: InitialSampler,
    pub velocity_init: VelocityInit,
    /// Record every this many steps; the first and last states are always recorded.
    pub record_every: usize,
    /// Exponent of the `L^p` norm reported in each observation.
    pub lp: f64,
    /// Stop a trajectory at the first step where `‖θ‖²_{L³} >= level`.
    pub stop_level: Option<f64>,
}

impl EnsembleSpec {
    pub fn n_steps(&self) -> Result<usize> {
        self.step.validate()?;
        if !(self.horizon > 0.0) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        let x = self.horizon / self.step.dt;
        let n = x.round();
        if (x - n).abs() > 1e-6 * x.max(1.0) || n < 1.0 {
            return invalid(format!("horizon {} is not a whole number of steps of {}", self.horizon, self.step.dt));
        }
        Ok(n as usize)
    }
}

/// Observables recorded along a trajectory; `cum_*` fields are left Riemann sums from time zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub theta_l2sq: f64,
    pub theta_h1sq: f64,
    pub theta_lp: f64,
    pub u_l2sq: f64,
    pub u_h1sq: f64,
    pub b_l2sq: f64,
    pub b_h1sq: f64,
    pub cum_theta_h1sq: f64,
    pub cum_u_h1sq: f64,
    pub cum_b_h1sq: f64,
    /// `Σ ⟨σ ΔW_n, θ_n⟩`.
    pub martingale: f64,
    /// `Σ Σ_{k,m} α² ⟨σ_k^m, θ_n⟩² dt`.
    pub quad_var: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub traj: u64,
    pub observations: Vec<Observation>,
    pub initial: SystemState,
    pub terminal: SystemState,
    /// Time of the first step with `‖θ‖²_{L³} >= level`, if any; later observations are frozen.
    pub stopped_at: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EnsembleRecord {
    pub system: SystemKind,
    pub params: PhysParams,
    pub noise: NoiseConfig,
    pub dt: f64,
    pub trajectories: Vec<TrajectoryRecord>,
}

struct Weights {
    u_l2: Vec<f64>,
    u_h1: Vec<f64>,
    b_l2: Vec<f64>,
    b_h1: Vec<f64>,
}

impl Weights {
    fn new(sym: &SymbolTable) -> Self {
        let g = &sym.grid;
        let n = g.len();
        let (mut u_l2, mut u_h1, mut b_l2, mut b_h1) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for &i in g.active() {
            let m2: f64 = sym.mu[i].iter().map(|c| c * c).sum::<f64>() * VOLUME;
            let q = g.k2()[i];
            u_l2[i] = m2;
            u_h1[i] = m2 * q;
            b_l2[i] = m2 * sym.mb[i] * sym.mb[i];
            b_h1[i] = b_l2[i] * q;
        }
        Weights { u_l2, u_h1, b_l2, b_h1 }
    }

    fn eval(w: &[f64], theta: &SpectralScalar) -> f64 {
        theta.coeffs().iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum()
    }
}

enum Stepper {
    Limit(LimitStepper),
    Full(FullStepper),
}

fn observe(state: &SystemState, w: Option<&Weights>, lp: f64, tr: &mut Transform) -> Result<Observation> {
    let th = state.theta();
    let mut o = Observation {
        time: state.time(),
        theta_l2sq: th.l2_sq(),
        theta_h1sq: th.h1_sq(),
        theta_lp: norm(th, NormKind::Lp(lp), tr)?,
        ..Default::default()
    };
    match (state, w) {
        (SystemState::Full(s), _) => {
            o.u_l2sq = s.u.l2_sq();
            o.u_h1sq = s.u.h1_sq();
            o.b_l2sq = s.b.l2_sq();
            o.b_h1sq = s.b.h1_sq();
        }
        (SystemState::Limit(s), Some(w)) => {
            o.u_l2sq = Weights::eval(&w.u_l2, &s.theta);
            o.u_h1sq = Weights::eval(&w.u_h1, &s.theta);
            o.b_l2sq = Weights::eval(&w.b_l2, &s.theta);
            o.b_h1sq = Weights::eval(&w.b_h1, &s.theta);
        }
        _ => {}
    }
    Ok(o)
}

/// Runs an ensemble of independent trajectories in parallel.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleRecord> {
    let n_steps = spec.n_steps()?;
    let grid = Grid::new(spec.grid_n)?;
    let params = spec.params.validated()?;
    let sampler = NoiseSampler::new(&grid, &spec.noise)?;
    let symbols = SymbolTable::new(&grid, &params)?;
    let weights = Weights::new(&symbols);
    let limit_model = match spec.system {
        SystemKind::Limit => Some(LimitModel::new(&grid, &params, &spec.step)?),
        SystemKind::Full => None,
    };
    let full_model = match spec.system {
        SystemKind::Full => Some(FullModel::new(&grid, &params, &spec.step)?),
        SystemKind::Limit => None,
    };
    let dt = spec.step.dt;
    let run_one = |traj: u64| -> Result<TrajectoryRecord> {
        let theta0 = spec.initial.sample(&grid, traj)?;
        let mut tr = Transform::new(&grid);
        let (mut state, mut stepper) = match spec.system {
            SystemKind::Limit => {
                let mut st = LimitStepper::new(limit_model.as_ref().unwrap());
                st.set_trajectory(traj);
                (SystemState::Limit(LimitState { theta: theta0, time: 0.0 }), Stepper::Limit(st))
            }
            SystemKind::Full => {
                let (u, b) = spec.velocity_init.build(&theta0, &symbols)?;
                let mut st = FullStepper::new(full_model.as_ref().unwrap());
                st.set_trajectory(traj);
                (SystemState::Full(FullState { u, b, theta: theta0, time: 0.0 }), Stepper::Full(st))
            }
        };
        let initial = state.clone();
        let mut obs = vec![observe(&state, Some(&weights), spec.lp, &mut tr)?];
        let (mut cum_t, mut cum_u, mut cum_b, mut mart, mut qv) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut stopped_at = None;
        for n in 0..n_steps {
            let dw = if spec.noise.entries.is_empty() { None } else { Some(sampler.sample_increment(dt, n as u64, traj)?) };
            {
                let th = state.theta();
                cum_t += th.h1_sq() * dt;
                match &state {
                    SystemState::Full(s) => {
                        cum_u += s.u.h1_sq() * dt;
                        cum_b += s.b.h1_sq() * dt;
                    }
                    SystemState::Limit(s) => {
                        cum_u += Weights::eval(&weights.u_h1, &s.theta) * dt;
                        cum_b += Weights::eval(&weights.b_h1, &s.theta) * dt;
                    }
                }
                if let Some(w) = &dw {
                    mart += w.dot(th);
                    qv += sampler.quadratic_density(th) * dt;
                }
            }
            state = match (&mut stepper, &state) {
                (Stepper::Limit(st), SystemState::Limit(s)) => SystemState::Limit(st.step(s, dw.as_ref())?),
                (Stepper::Full(st), SystemState::Full(s)) => SystemState::Full(st.step(s, dw.as_ref())?),
                _ => unreachable!("stepper and state kinds always agree"),
            };
            let last = n + 1 == n_steps;
            let mut stop_now = false;
            if let Some(level) = spec.stop_level {
                let l3 = norm(state.theta(), NormKind::Lp(3.0), &mut tr)?;
                stop_now = l3 * l3 >= level;
            }
            if last || stop_now || (spec.record_every > 0 && (n + 1) % spec.record_every == 0) {
                let mut o = observe(&state, Some(&weights), spec.lp, &mut tr)?;
                o.cum_theta_h1sq = cum_t;
                o.cum_u_h1sq = cum_u;
                o.cum_b_h1sq = cum_b;
                o.martingale = mart;
                o.quad_var = qv;
                obs.push(o);
            }
            if stop_now {
                stopped_at = Some(state.time());
                break;
            }
        }
        Ok(TrajectoryRecord { traj, observations: obs, initial, terminal: state, stopped_at })
    };
    let trajectories: Result<Vec<_>> =
        (spec.first_traj..spec.first_traj + spec.n_traj as u64).into_par_iter().map(run_one).collect();
    Ok(EnsembleRecord { system: spec.system, params, noise: spec.noise.clone(), dt, trajectories: trajectories? })
}
