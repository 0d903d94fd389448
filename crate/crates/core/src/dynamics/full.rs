use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::propagator::ModeExp;
use super::{check_blowup, FullState, StepConfig};
use crate::error::{invalid, Result};
use crate::spectral::grid::{dot_k, norm_sq, Wavevector};
use crate::spectral::ops::{divergence, leray_in_place};
use crate::spectral::{Grid, PhysParams, SpectralScalar, SpectralVector, Transform};

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `P_k (Ω×·)` as a 3×3 real matrix.
pub(crate) fn projected_coriolis(k: Wavevector, om: [f64; 3]) -> [[f64; 3]; 3] {
    let cross = [[0.0, -om[2], om[1]], [om[2], 0.0, -om[0]], [-om[1], om[0], 0.0]];
    let q = norm_sq(k);
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = cross[i][j];
            for l in 0..3 {
                s -= kf[i] * kf[l] / q * cross[l][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// `P_k e₃`.
pub(crate) fn projected_e3(k: Wavevector) -> [f64; 3] {
    let q = norm_sq(k);
    [-(k[0] * k[2]) as f64 / q, -(k[1] * k[2]) as f64 / q, 1.0 - (k[2] * k[2]) as f64 / q]
}

/// Linear operator of the full system on `(U, B, Θ)` at wavevector `k`.
pub fn full_linear_operator(k: Wavevector, p: &PhysParams) -> DMatrix<Complex64> {
    let q = norm_sq(k);
    let bk = dot_k(p.b0, k);
    let cor = projected_coriolis(k, p.omega());
    let pe3 = projected_e3(k);
    let mut l = DMatrix::<Complex64>::zeros(7, 7);
    let ie = 1.0 / p.eps;
    let id = 1.0 / p.delta;
    for i in 0..3 {
        for j in 0..3 {
            l[(i, j)] = c(-ie * cor[i][j]);
        }
        l[(i, i)] += c(-ie * p.nu * q);
        l[(i, 3 + i)] = Complex64::new(0.0, ie * bk);
        l[(i, 6)] = c(ie * pe3[i]);
        l[(3 + i, i)] = Complex64::new(0.0, id * bk);
        l[(3 + i, 3 + i)] = c(-id * q);
    }
    l[(6, 6)] = c(-p.kappa * q);
    l
}

/// Shared step tables for the full magnetostrophic system with `ε, δ > 0`.
pub struct FullModel {
    pub grid: Arc<Grid>,
    pub params: PhysParams,
    pub cfg: StepConfig,
    pub(crate) prop: ModeExp,
}

impl FullModel {
    pub fn new(grid: &Arc<Grid>, params: &PhysParams, cfg: &StepConfig) -> Result<Arc<Self>> {
        let params = params.validated()?;
        cfg.validate()?;
        if !(params.eps > 0.0 && params.delta > 0.0) {
            return invalid(format!(
                "the full system needs eps > 0 and delta > 0, got {} and {}",
                params.eps, params.delta
            ));
        }
        let prop = ModeExp::build(grid, 7, cfg.dt, |k| full_linear_operator(k, &params))?;
        Ok(Arc::new(FullModel { grid: grid.clone(), params, cfg: *cfg, prop }))
    }
}

/// Per-thread stepper for the full system.
///
/// Exponential Euler: the linear coupling of velocity, field and temperature is
/// integrated exactly per mode (which handles the fast `1/ε`, `1/δ` scales), while
/// the quadratic terms, written in divergence form, are frozen over the step.
pub struct FullStepper {
    model: Arc<FullModel>,
    tr: Transform,
    steps: u64,
    traj: Option<u64>,
}

impl FullStepper {
    pub fn new(model: &Arc<FullModel>) -> Self {
        FullStepper { model: model.clone(), tr: Transform::new(&model.grid), steps: 0, traj: None }
    }

    pub fn model(&self) -> &Arc<FullModel> {
        &self.model
    }

    pub fn transform(&mut self) -> &mut Transform {
        &mut self.tr
    }

    pub fn set_trajectory(&mut self, traj: u64) {
        self.traj = Some(traj);
    }

    /// Quadratic terms `(−P(U·∇U − (δ/ε)B·∇B), −(U·∇B − B·∇U), −U·∇Θ)`.
    pub fn nonlinear(&mut self, u: &SpectralVector, b: &SpectralVector, theta: &SpectralScalar) -> (SpectralVector, SpectralVector, SpectralScalar) {
        let grid = self.model.grid.clone();
        if !self.model.cfg.advection {
            return (SpectralVector::zeros(&grid), SpectralVector::zeros(&grid), SpectralScalar::zeros(&grid));
        }
        let r = self.model.params.delta / self.model.params.eps;
        let v = self.tr.inverse_many(&[&u.comps[0], &u.comps[1], &u.comps[2], &b.comps[0], &b.comps[1], &b.comps[2], theta]);
        let len = grid.len();
        let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..len).map(f).collect() };
        let (uu, bb, th) = (&v[0..3], &v[3..6], &v[6]);
        // Symmetric momentum flux T_ab = U_a U_b − (δ/ε) B_a B_b.
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        let mut phys: Vec<Vec<f64>> =
            pairs.iter().map(|&(a, c)| prod(&|i| uu[a][i] * uu[c][i] - r * bb[a][i] * bb[c][i])).collect();
        // Antisymmetric induction flux W_ab = U_b B_a − B_b U_a.
        for &(a, c) in &[(0, 1), (0, 2), (1, 2)] {
            phys.push(prod(&|i| uu[c][i] * bb[a][i] - bb[c][i] * uu[a][i]));
        }
        for a in 0..3 {
            phys.push(prod(&|i| uu[a][i] * th[i]));
        }
        let f = self.tr.forward_many(&phys);
        let t = |a: usize, c: usize| -> &SpectralScalar {
            let (a, c) = if a <= c { (a, c) } else { (c, a) };
            &f[pairs.iter().position(|&p| p == (a, c)).unwrap()]
        };
        let mut nu = SpectralVector::new([
            divergence([t(0, 0), t(0, 1), t(0, 2)]),
            divergence([t(1, 0), t(1, 1), t(1, 2)]),
            divergence([t(2, 0), t(2, 1), t(2, 2)]),
        ]);
        nu.scale(-1.0);
        leray_in_place(&mut nu);
        let zero = SpectralScalar::zeros(&grid);
        let (w01, w02, w12) = (&f[6], &f[7], &f[8]);
        let n10 = w01.scaled(-1.0);
        let n20 = w02.scaled(-1.0);
        let n21 = w12.scaled(-1.0);
        let mut nb = SpectralVector::new([
            divergence([&zero, w01, w02]),
            divergence([&n10, &zero, w12]),
            divergence([&n20, &n21, &zero]),
        ]);
        nb.scale(-1.0);
        leray_in_place(&mut nb);
        let mut nt = divergence([&f[9], &f[10], &f[11]]);
        nt.scale(-1.0);
        (nu, nb, nt)
    }

    pub fn step(&mut self, s: &FullState, dw: Option<&SpectralScalar>) -> Result<FullState> {
        let (nu, nb, nt) = self.nonlinear(&s.u, &s.b, &s.theta);
        let grid = self.model.grid.clone();
        let mut out = FullState::zeros(&grid, s.time + self.model.cfg.dt);
        let mut x = [Complex64::new(0.0, 0.0); 7];
        let mut n = [Complex64::new(0.0, 0.0); 7];
        let mut w = [Complex64::new(0.0, 0.0); 7];
        let mut y = [Complex64::new(0.0, 0.0); 7];
        for &idx in grid.active() {
            for a in 0..3 {
                x[a] = s.u.comps[a].coeffs()[idx];
                x[3 + a] = s.b.comps[a].coeffs()[idx];
                n[a] = nu.comps[a].coeffs()[idx];
                n[3 + a] = nb.comps[a].coeffs()[idx];
            }
            x[6] = s.theta.coeffs()[idx];
            n[6] = nt.coeffs()[idx];
            let wn = dw.map(|d| {
                w[6] = d.coeffs()[idx];
                &w[..]
            });
            self.model.prop.apply(idx, &x, Some(&n), wn, &mut y);
            for a in 0..3 {
                out.u.comps[a].coeffs_mut()[idx] = y[a];
                out.b.comps[a].coeffs_mut()[idx] = y[3 + a];
            }
            out.theta.coeffs_mut()[idx] = y[6];
        }
        self.steps += 1;
        let ok = out.u.is_finite() && out.b.is_finite() && out.theta.is_finite() && out.theta.max_abs() < 1e150 && out.u.max_abs() < 1e150;
        check_blowup(ok, self.steps, self.traj)?;
        Ok(out)
    }
}

/// One step of the full system; builds the step tables on every call.
pub fn step_full(state: &FullState, dt: f64, noise_increment: Option<&SpectralScalar>, params: &PhysParams) -> Result<FullState> {
    let model = FullModel::new(state.theta.grid(), params, &StepConfig::new(dt))?;
    FullStepper::new(&model).step(state, noise_increment)
}
