use std::sync::Arc;

use super::{check_blowup, LimitState, StepConfig};
use crate::error::{invalid, Result};
use crate::spectral::ops::divergence;
use crate::spectral::{Grid, PhysParams, SpectralScalar, SpectralVector, SymbolTable, Transform};

/// Shared, read-only data for stepping the active-scalar limit
/// `dθ + M_uθ·∇θ dt = κΔθ dt + σ dW`.
pub struct LimitModel {
    pub grid: Arc<Grid>,
    pub params: PhysParams,
    pub cfg: StepConfig,
    pub symbols: SymbolTable,
    decay: Vec<f64>,
    phi: Vec<f64>,
    half: Vec<f64>,
}

impl LimitModel {
    pub fn new(grid: &Arc<Grid>, params: &PhysParams, cfg: &StepConfig) -> Result<Arc<Self>> {
        let params = params.validated()?;
        cfg.validate()?;
        let symbols = SymbolTable::new(grid, &params)?;
        let dt = cfg.dt;
        let mut decay = vec![0.0; grid.len()];
        let mut phi = vec![0.0; grid.len()];
        let mut half = vec![0.0; grid.len()];
        for &idx in grid.active() {
            let a = params.kappa * grid.k2()[idx] * dt;
            decay[idx] = (-a).exp();
            phi[idx] = dt * phi1(-a);
            half[idx] = (-0.5 * a).exp();
        }
        Ok(Arc::new(LimitModel { grid: grid.clone(), params, cfg: *cfg, symbols, decay, phi, half }))
    }
}

/// `(e^z − 1)/z`, accurate near zero.
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// Per-thread stepper for the limit equation.
///
/// The scheme is first-order exponential Euler: the diffusion is integrated exactly,
/// the advection is frozen over the step, and the forcing increment enters with the
/// half-step decay factor `e^{−κ|k|²dt/2}`.
pub struct LimitStepper {
    model: Arc<LimitModel>,
    tr: Transform,
    steps: u64,
    traj: Option<u64>,
}

impl LimitStepper {
    pub fn new(model: &Arc<LimitModel>) -> Self {
        LimitStepper { model: model.clone(), tr: Transform::new(&model.grid), steps: 0, traj: None }
    }

    pub fn model(&self) -> &Arc<LimitModel> {
        &self.model
    }

    pub fn transform(&mut self) -> &mut Transform {
        &mut self.tr
    }

    pub fn set_trajectory(&mut self, traj: u64) {
        self.traj = Some(traj);
    }

    /// Velocity `M_u θ`.
    pub fn velocity(&self, theta: &SpectralScalar) -> SpectralVector {
        self.model.symbols.velocity(theta)
    }

    /// Bilinear transport term `−∇·((M_u f) g)`.
    pub fn transport(&mut self, f: &SpectralScalar, g: &SpectralScalar) -> SpectralScalar {
        let u = self.model.symbols.velocity(f);
        let vals = self.tr.inverse_many(&[&u.comps[0], &u.comps[1], &u.comps[2], g]);
        let prods: Vec<Vec<f64>> =
            (0..3).map(|a| vals[a].iter().zip(&vals[3]).map(|(x, y)| x * y).collect()).collect();
        let flux = self.tr.forward_many(&prods);
        let mut out = divergence([&flux[0], &flux[1], &flux[2]]);
        out.scale(-1.0);
        out
    }

    /// Nonlinear drift `−M_uθ·∇θ`, or zero when advection is disabled.
    pub fn nonlinear(&mut self, theta: &SpectralScalar) -> SpectralScalar {
        if self.model.cfg.advection {
            self.transport(theta, theta)
        } else {
            SpectralScalar::zeros(&self.model.grid)
        }
    }

    /// Combines the linear propagator with a precomputed drift and increment.
    pub(crate) fn combine(&self, theta: &SpectralScalar, drift: &SpectralScalar, dw: Option<&SpectralScalar>) -> SpectralScalar {
        let m = &self.model;
        let mut out = SpectralScalar::zeros(&m.grid);
        let oc = out.coeffs_mut();
        let t = theta.coeffs();
        let n = drift.coeffs();
        for &idx in m.grid.active() {
            let mut v = m.decay[idx] * t[idx] + m.phi[idx] * n[idx];
            if let Some(w) = dw {
                v += m.half[idx] * w.coeffs()[idx];
            }
            oc[idx] = v;
        }
        out
    }

    /// Advances one step of length `cfg.dt`.
    pub fn step(&mut self, s: &LimitState, dw: Option<&SpectralScalar>) -> Result<LimitState> {
        let drift = self.nonlinear(&s.theta);
        let theta = self.combine(&s.theta, &drift, dw);
        self.steps += 1;
        check_blowup(theta.is_finite() && theta.max_abs() < 1e150, self.steps, self.traj)?;
        Ok(LimitState { theta, time: s.time + self.model.cfg.dt })
    }

    /// Tangent of [`LimitStepper::step`] at `theta` applied to `zeta`.
    pub fn tangent(&mut self, theta: &SpectralScalar, zeta: &SpectralScalar) -> SpectralScalar {
        let drift = if self.model.cfg.advection {
            self.transport(zeta, theta).add(&self.transport(theta, zeta))
        } else {
            SpectralScalar::zeros(&self.model.grid)
        };
        self.combine(zeta, &drift, None)
    }

    /// Second-order tangent: the step's second derivative at `theta` in directions
    /// `z1`, `z2`, plus its first derivative applied to `k`.
    pub fn second_tangent(
        &mut self,
        theta: &SpectralScalar,
        z1: &SpectralScalar,
        z2: &SpectralScalar,
        k: &SpectralScalar,
    ) -> SpectralScalar {
        let drift = if self.model.cfg.advection {
            let mut d = self.transport(k, theta).add(&self.transport(theta, k));
            d.axpy(1.0, &self.transport(z1, z2));
            d.axpy(1.0, &self.transport(z2, z1));
            d
        } else {
            SpectralScalar::zeros(&self.model.grid)
        };
        self.combine(k, &drift, None)
    }
}

/// One step of the limit equation; builds the step tables on every call.
pub fn step_limit(state: &LimitState, dt: f64, noise_increment: Option<&SpectralScalar>, params: &PhysParams) -> Result<LimitState> {
    if let Some(w) = noise_increment {
        if w.grid().n() != state.theta.grid().n() {
            return invalid("noise increment lives on a different grid");
        }
    }
    let model = LimitModel::new(state.theta.grid(), params, &StepConfig::new(dt))?;
    LimitStepper::new(&model).step(state, noise_increment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::advect;

    #[test]
    fn pure_diffusion_single_mode() {
        let g = Grid::new(8).unwrap();
        let p = PhysParams { kappa: 0.5, ..Default::default() };
        let theta = SpectralScalar::single_mode(&g, [1, 1, 0], 0, 1.0).unwrap();
        let model = LimitModel::new(&g, &p, &StepConfig { dt: 0.01, advection: false }).unwrap();
        let mut st = LimitStepper::new(&model);
        let mut s = LimitState { theta: theta.clone(), time: 0.0 };
        for _ in 0..100 {
            s = st.step(&s, None).unwrap();
        }
        let expected = (-0.5f64 * 2.0 * 1.0).exp();
        assert!((s.theta.mode_coordinate([1, 1, 0], 0) - expected).abs() < 1e-12);
        assert!((s.time - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transport_equals_advection() {
        let g = Grid::new(8).unwrap();
        let p = PhysParams::default();
        let theta = SpectralScalar::single_mode(&g, [1, 0, 1], 0, 1.0)
            .unwrap()
            .add(&SpectralScalar::single_mode(&g, [0, 1, -1], 1, 0.7).unwrap())
            .add(&SpectralScalar::single_mode(&g, [1, 1, 0], 1, 0.3).unwrap());
        let model = LimitModel::new(&g, &p, &StepConfig::new(1e-3)).unwrap();
        let mut st = LimitStepper::new(&model);
        let n = st.nonlinear(&theta);
        let u = st.velocity(&theta);
        let mut tr = Transform::new(&g);
        let a = advect(&u, &theta, &mut tr);
        assert!(n.add(&a).max_abs() < 1e-13 * a.max_abs().max(1e-300));
    }

    #[test]
    fn free_function_matches_stepper() {
        let g = Grid::new(8).unwrap();
        let p = PhysParams::default();
        let theta = SpectralScalar::single_mode(&g, [1, 0, 1], 1, 1.0).unwrap();
        let s = LimitState { theta, time: 0.0 };
        let a = step_limit(&s, 1e-3, None, &p).unwrap();
        let model = LimitModel::new(&g, &p, &StepConfig::new(1e-3)).unwrap();
        let b = LimitStepper::new(&model).step(&s, None).unwrap();
        assert!(a.theta.sub(&b.theta).max_abs() == 0.0);
    }

    #[test]
    fn phi1_small_argument() {
        assert!((phi1(0.0) - 1.0).abs() < 1e-16);
        assert!((phi1(-1e-6) - (-1e-6f64).exp_m1() / -1e-6).abs() < 1e-14);
        assert!((phi1(-2.0) - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
    }
}
