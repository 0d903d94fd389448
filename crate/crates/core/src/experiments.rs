//! The three headline experiments: finite-time convergence of the full system to
//! the limit, convergence of stationary ensembles, and contraction of the limit
//! dynamics in the weighted Wasserstein distance.
//!
//! Paired runs share noise keys (same trajectory ids), so each comparison is a
//! common-random-numbers estimate.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    FullModel, FullState, FullStepper, InitialSampler, LimitModel, LimitState, LimitStepper, StepConfig, VelocityInit,
};
use crate::error::{invalid, Result};
use crate::metrics::{lift, rho_bounds, rho_tilde, wasserstein, EmpiricalMeasure, MetricParams, WassersteinBracket};
use crate::noise::{NoiseConfig, NoiseSampler};
use crate::spectral::{Grid, PhysParams, SpectralScalar, SymbolTable};

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let n = t / dt;
    if !(n >= 0.0) || (n - n.round()).abs() > 1e-6 * n.max(1.0) {
        return invalid(format!("time {t} is not a multiple of dt = {dt}"));
    }
    Ok(n.round() as usize)
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug)]
pub struct ConvergenceSpec {
    pub grid_n: usize,
    /// `eps` and `delta` are overridden by each entry of `eps_delta`.
    pub params: PhysParams,
    pub noise: NoiseConfig,
    pub step: StepConfig,
    pub horizon: f64,
    pub n_traj: usize,
    pub first_traj: u64,
    pub initial: InitialSampler,
    pub velocity_init: VelocityInit,
    pub eps_delta: Vec<(f64, f64)>,
    /// Exponent in `E sup ‖Θ − θ‖^p`.
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub delta: f64,
    /// `E sup_{[0,T]} ‖Θ − θ‖^p`.
    pub theta_err: f64,
    pub theta_err_stderr: f64,
    /// `E ∫₀ᵀ ‖U − M_uθ‖²_{H¹} + ‖B − M_bθ‖²_{H¹}`.
    pub field_err: f64,
    pub field_err_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Slope of `log theta_err` against `log(ε + δ)`.
    pub theta_slope: f64,
    pub field_slope: f64,
}

impl ConvergenceTable {
    /// Both error columns strictly decrease along rows sorted by decreasing `ε + δ`.
    pub fn strictly_decreasing(&self) -> (bool, bool) {
        let mut r = self.rows.clone();
        r.sort_by(|a, b| (b.eps + b.delta).total_cmp(&(a.eps + a.delta)));
        let th = r.windows(2).all(|w| w[1].theta_err < w[0].theta_err);
        let fi = r.windows(2).all(|w| w[1].field_err < w[0].field_err);
        (th, fi)
    }
}

/// Runs full and limit systems side by side on shared noise.
pub fn run_convergence(spec: &ConvergenceSpec) -> Result<ConvergenceTable> {
    if spec.eps_delta.is_empty() || spec.n_traj == 0 {
        return invalid("need at least one (eps, delta) pair and one trajectory");
    }
    let grid = Grid::new(spec.grid_n)?;
    let n_steps = steps_for(spec.horizon, spec.step.dt)?;
    let sampler = NoiseSampler::new(&grid, &spec.noise)?;
    let limit = LimitModel::new(&grid, &spec.params, &spec.step)?;
    let mut rows = Vec::new();
    for &(eps, delta) in &spec.eps_delta {
        let p = spec.params.with_eps_delta(eps, delta);
        let tag = format!("eps = {eps}, delta = {delta}");
        let full = FullModel::new(&grid, &p, &spec.step)?;
        let symbols = &limit.symbols;
        let per: Vec<(f64, f64)> = (spec.first_traj..spec.first_traj + spec.n_traj as u64)
            .into_par_iter()
            .map(|traj| -> Result<(f64, f64)> {
                let th0 = spec.initial.sample(&grid, traj)?;
                let (u0, b0) = spec.velocity_init.build(&th0, symbols)?;
                let mut ls = LimitStepper::new(&limit);
                let mut fs = FullStepper::new(&full);
                ls.set_trajectory(traj);
                fs.set_trajectory(traj);
                let mut a = LimitState { theta: th0.clone(), time: 0.0 };
                let mut b = FullState { u: u0, b: b0, theta: th0, time: 0.0 };
                let (mut sup, mut integral) = (0.0f64, 0.0);
                let field_gap = |a: &LimitState, b: &FullState| {
                    b.u.sub(&symbols.velocity(&a.theta)).h1_sq() + b.b.sub(&symbols.magnetic(&a.theta)).h1_sq()
                };
                for n in 0..n_steps {
                    let dw = sampler.sample_increment(spec.step.dt, n as u64, traj)?;
                    let dw = (!spec.noise.entries.is_empty()).then_some(dw);
                    integral += field_gap(&a, &b) * spec.step.dt;
                    a = ls.step(&a, dw.as_ref())?;
                    b = fs.step(&b, dw.as_ref())?;
                    sup = sup.max(b.theta.sub(&a.theta).l2());
                }
                Ok((sup.powf(spec.p), integral))
            })
            .collect::<Result<_>>()
            .map_err(|e| e.tagged(tag))?;
        let (te, tse) = mean_stderr(&per.iter().map(|v| v.0).collect::<Vec<_>>());
        let (fe, fse) = mean_stderr(&per.iter().map(|v| v.1).collect::<Vec<_>>());
        rows.push(ConvergenceRow { eps, delta, theta_err: te, theta_err_stderr: tse, field_err: fe, field_err_stderr: fse });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.eps + r.delta).collect();
    let slope = |y: Vec<f64>| if rows.len() > 1 && y.iter().all(|v| *v > 0.0) { loglog_slope(&x, &y) } else { f64::NAN };
    let theta_slope = slope(rows.iter().map(|r| r.theta_err).collect());
    let field_slope = slope(rows.iter().map(|r| r.field_err).collect());
    Ok(ConvergenceTable { rows, theta_slope, field_slope })
}

/// Evolves limit trajectories and returns their states at each checkpoint.
///
/// `snapshots[c][i]` is trajectory `first_traj + i` at `checkpoints[c]`.
pub fn limit_snapshots(
    model: &Arc<LimitModel>,
    noise: &NoiseConfig,
    initial: &InitialSampler,
    first_traj: u64,
    n_traj: usize,
    checkpoints: &[f64],
) -> Result<Vec<Vec<SpectralScalar>>> {
    let dt = model.cfg.dt;
    let marks: Vec<usize> = checkpoints.iter().map(|&t| steps_for(t, dt)).collect::<Result<_>>()?;
    if marks.windows(2).any(|w| w[1] < w[0]) {
        return invalid("checkpoints must be nondecreasing");
    }
    let sampler = NoiseSampler::new(&model.grid, noise)?;
    let per: Vec<Vec<SpectralScalar>> = (first_traj..first_traj + n_traj as u64)
        .into_par_iter()
        .map(|traj| -> Result<Vec<SpectralScalar>> {
            let mut st = LimitStepper::new(model);
            st.set_trajectory(traj);
            let mut s = LimitState { theta: initial.sample(&model.grid, traj)?, time: 0.0 };
            let mut out = Vec::with_capacity(marks.len());
            let mut n = 0;
            for &m in &marks {
                while n < m {
                    let dw = (!noise.entries.is_empty()).then(|| sampler.sample_increment(dt, n as u64, traj)).transpose()?;
                    s = st.step(&s, dw.as_ref())?;
                    n += 1;
                }
                out.push(s.theta.clone());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..marks.len()).map(|c| per.iter().map(|v| v[c].clone()).collect()).collect())
}

/// Terminal full-system states after `horizon`.
pub fn full_samples(
    model: &Arc<FullModel>,
    noise: &NoiseConfig,
    initial: &InitialSampler,
    velocity_init: VelocityInit,
    first_traj: u64,
    n_traj: usize,
    horizon: f64,
) -> Result<Vec<FullState>> {
    let dt = model.cfg.dt;
    let n_steps = steps_for(horizon, dt)?;
    let sampler = NoiseSampler::new(&model.grid, noise)?;
    let symbols = SymbolTable::new(&model.grid, &model.params)?;
    (first_traj..first_traj + n_traj as u64)
        .into_par_iter()
        .map(|traj| -> Result<FullState> {
            let mut st = FullStepper::new(model);
            st.set_trajectory(traj);
            let th = initial.sample(&model.grid, traj)?;
            let (u, b) = velocity_init.build(&th, &symbols)?;
            let mut s = FullState { u, b, theta: th, time: 0.0 };
            for n in 0..n_steps {
                let dw = (!noise.entries.is_empty()).then(|| sampler.sample_increment(dt, n as u64, traj)).transpose()?;
                s = st.step(&s, dw.as_ref())?;
            }
            Ok(s)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StationarySpec {
    pub grid_n: usize,
    pub params: PhysParams,
    pub noise: NoiseConfig,
    pub step: StepConfig,
    /// Spin-up time; `None` means ten temperature dissipation times `10/(κ min|k|²)`.
    pub burn_in: Option<f64>,
    pub n_samples: usize,
    pub first_traj: u64,
    pub initial: InitialSampler,
    pub eps_delta: Vec<(f64, f64)>,
    pub metric: MetricParams,
}

impl StationarySpec {
    pub fn burn_in(&self) -> f64 {
        self.burn_in.unwrap_or(10.0 / self.params.kappa)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryRow {
    pub eps: f64,
    pub delta: f64,
    pub bracket: WassersteinBracket,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryTable {
    pub burn_in: f64,
    pub rows: Vec<StationaryRow>,
    /// Bracket between the two halves of the lifted limit ensemble.
    pub split_half: WassersteinBracket,
}

impl StationaryTable {
    /// Upper bracket decreases along rows sorted by decreasing `ε + δ`.
    pub fn upper_monotone(&self) -> bool {
        let mut r = self.rows.clone();
        r.sort_by(|a, b| (b.eps + b.delta).total_cmp(&(a.eps + a.delta)));
        r.windows(2).all(|w| w[1].bracket.upper <= w[0].bracket.upper)
    }
}

/// `𝔚_ρ̃` between spun-up full ensembles and the lifted spun-up limit ensemble.
pub fn run_stationary(spec: &StationarySpec) -> Result<StationaryTable> {
    if spec.n_samples < 2 {
        return invalid("need at least two samples");
    }
    let grid = Grid::new(spec.grid_n)?;
    let t = spec.burn_in();
    let limit = LimitModel::new(&grid, &spec.params, &spec.step)?;
    let lim = limit_snapshots(&limit, &spec.noise, &spec.initial, spec.first_traj, spec.n_samples, &[t])?.remove(0);
    let lifted: Vec<FullState> = lim.iter().map(|th| lift(th, &limit.params)).collect::<Result<_>>()?;
    let h = spec.n_samples / 2;
    let split_half = wasserstein(
        &EmpiricalMeasure::new(lifted[..h].to_vec()),
        &EmpiricalMeasure::new(lifted[h..2 * h].to_vec()),
        |x, y| rho_tilde(x, y, &spec.metric),
    )?;
    let mu = EmpiricalMeasure::new(lifted);
    let mut rows = Vec::new();
    for &(eps, delta) in &spec.eps_delta {
        let p = spec.params.with_eps_delta(eps, delta);
        let full = FullModel::new(&grid, &p, &spec.step)?;
        let xs = full_samples(&full, &spec.noise, &spec.initial, VelocityInit::Matched, spec.first_traj, spec.n_samples, t)
            .map_err(|e| e.tagged(format!("eps = {eps}, delta = {delta}")))?;
        let bracket = wasserstein(&mu, &EmpiricalMeasure::new(xs), |x, y| rho_tilde(x, y, &spec.metric))?;
        rows.push(StationaryRow { eps, delta, bracket });
    }
    Ok(StationaryTable { burn_in: t, rows, split_half })
}

#[derive(Clone, Debug)]
pub struct ContractionSpec {
    pub grid_n: usize,
    pub params: PhysParams,
    pub noise: NoiseConfig,
    pub step: StepConfig,
    pub n_samples: usize,
    pub first_traj: u64,
    pub initial_a: InitialSampler,
    pub initial_b: InitialSampler,
    /// Checkpoints in units of the dissipation time `1/(κ min|k|²)`.
    pub checkpoints: Vec<f64>,
    pub metric: MetricParams,
    /// Drive both ensembles with the same noise keys; otherwise the second uses fresh ids.
    pub shared_noise: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub time: f64,
    pub bracket: WassersteinBracket,
}

/// `𝔚_ρ` between two limit ensembles from different initial laws at a sequence of times.
pub fn run_contraction(spec: &ContractionSpec) -> Result<Vec<ContractionRow>> {
    let grid = Grid::new(spec.grid_n)?;
    let model = LimitModel::new(&grid, &spec.params, &spec.step)?;
    let times: Vec<f64> = spec.checkpoints.iter().map(|c| c / spec.params.kappa).collect();
    let a = limit_snapshots(&model, &spec.noise, &spec.initial_a, spec.first_traj, spec.n_samples, &times)?;
    let off = if spec.shared_noise { 0 } else { spec.n_samples as u64 };
    let b = limit_snapshots(&model, &spec.noise, &spec.initial_b, spec.first_traj + off, spec.n_samples, &times)?;
    times
        .iter()
        .zip(a.into_iter().zip(b))
        .map(|(&time, (xa, xb))| {
            let bracket =
                wasserstein(&EmpiricalMeasure::new(xa), &EmpiricalMeasure::new(xb), |x, y| rho_bounds(x, y, &spec.metric))?;
            Ok(ContractionRow { time, bracket })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.2, 0.02, 0.002];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((loglog_slope(&x, &y) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_mode_without_noise() {
        // A single unforced mode is not advected, so both temperatures decay identically
        // while the fields relax to the constitutive law inside an O(ε + δ) layer.
        let spec = ConvergenceSpec {
            grid_n: 8,
            params: PhysParams::default(),
            noise: NoiseConfig::zero(0),
            step: StepConfig::new(0.01),
            horizon: 0.2,
            n_traj: 2,
            first_traj: 0,
            initial: InitialSampler::SingleMode { k: [1, 0, 0], parity: 0, amplitude: 0.5 },
            velocity_init: VelocityInit::Matched,
            eps_delta: vec![(1e-2, 1e-2), (1e-3, 1e-3)],
            p: 1.0,
        };
        let t = run_convergence(&spec).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.theta_err < 1e-12));
        assert!(t.rows[1].field_err < 0.1 * t.rows[0].field_err);
    }

    #[test]
    fn snapshots_are_reproducible() {
        let g = Grid::new(8).unwrap();
        let m = LimitModel::new(&g, &PhysParams::default(), &StepConfig::new(0.01)).unwrap();
        let noise = NoiseConfig::unit_axes(0.3, 5);
        let init = InitialSampler::Gaussian { radius: 2.0, amplitude: 0.5, seed: 1 };
        let a = limit_snapshots(&m, &noise, &init, 0, 3, &[0.05, 0.1]).unwrap();
        let b = limit_snapshots(&m, &noise, &init, 0, 3, &[0.1]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[1][2].sub(&b[0][2]).max_abs(), 0.0);
        assert!(limit_snapshots(&m, &noise, &init, 0, 1, &[0.013]).is_err());
    }
}
