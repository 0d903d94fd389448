//! Two-stage boundary-layer correctors for the singular limit.
//!
//! Stage one keeps the fast velocity relaxation `e^{−tQ/ε}` acting on the initial
//! mismatch `U(0) − Q⁻¹Pe₃Θ(0)` and slaves the field to the velocity. Stage two
//! resolves the velocity at finite `ε` and keeps the magnetic layer
//! `e^{tΔ/δ}(B(0) − (−Δ)⁻¹B₀·∇U(0))`, with the momentum advected by the stage-one
//! velocity. Both stages are integrated with the same per-mode exponential
//! scheme as the full system, so the layer terms are exact in time.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::full::{c, projected_coriolis, projected_e3};
use super::propagator::ModeExp;
use super::{check_blowup, StepConfig};
use crate::error::{invalid, Result};
use crate::spectral::grid::{dot_k, norm_sq, Wavevector};
use crate::spectral::ops::leray_in_place;
use crate::spectral::{advect, advect_vector, Grid, PhysParams, SpectralScalar, SpectralVector, SymbolTable, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectorStage {
    One,
    Two,
}

/// Stage-one variables: velocity layer and temperature.
#[derive(Clone, Debug)]
pub struct StageOne {
    pub layer: SpectralVector,
    pub theta: SpectralScalar,
}

/// Corrector state with reconstructed velocity and field.
#[derive(Clone, Debug)]
pub struct CorrectorState {
    pub stage: CorrectorStage,
    pub u: SpectralVector,
    pub b: SpectralVector,
    pub theta: SpectralScalar,
    pub time: f64,
    /// Stage-one subsystem (always present; in stage two it supplies the advecting velocity).
    pub one: StageOne,
    /// Stage two only: the magnetic layer `b − (−Δ)⁻¹B₀·∇u`.
    pub b_layer: Option<SpectralVector>,
}

/// `Q_k` restricted to solenoidal vectors as a 3×3 real matrix.
fn q_matrix(k: Wavevector, p: &PhysParams) -> [[f64; 3]; 3] {
    let q = norm_sq(k);
    let bk = dot_k(p.b0, k);
    let mut m = projected_coriolis(k, p.omega());
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += p.nu * q + bk * bk / q;
    }
    m
}

fn stage_one_operator(k: Wavevector, p: &PhysParams) -> DMatrix<Complex64> {
    let qm = q_matrix(k, p);
    let mut l = DMatrix::<Complex64>::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            l[(i, j)] = c(-qm[i][j] / p.eps);
        }
    }
    l[(3, 3)] = c(-p.kappa * norm_sq(k));
    l
}

fn stage_two_operator(k: Wavevector, p: &PhysParams) -> DMatrix<Complex64> {
    let qm = q_matrix(k, p);
    let q = norm_sq(k);
    let bk = dot_k(p.b0, k);
    let pe3 = projected_e3(k);
    let mut l = DMatrix::<Complex64>::zeros(7, 7);
    for i in 0..3 {
        for j in 0..3 {
            l[(i, j)] = c(-qm[i][j] / p.eps);
        }
        l[(i, 3 + i)] = Complex64::new(0.0, bk / p.eps);
        l[(i, 6)] = c(pe3[i] / p.eps);
        l[(3 + i, 3 + i)] = c(-q / p.delta);
    }
    l[(6, 6)] = c(-p.kappa * q);
    l
}

/// Shared tables for corrector stepping.
pub struct CorrectorModel {
    pub grid: Arc<Grid>,
    pub params: PhysParams,
    pub cfg: StepConfig,
    pub stage: CorrectorStage,
    symbols: SymbolTable,
    one: ModeExp,
    two: Option<ModeExp>,
}

impl CorrectorModel {
    pub fn new(grid: &Arc<Grid>, params: &PhysParams, cfg: &StepConfig, stage: CorrectorStage) -> Result<Arc<Self>> {
        let params = params.validated()?;
        cfg.validate()?;
        if !(params.eps > 0.0) {
            return invalid(format!("correctors need eps > 0, got {}", params.eps));
        }
        if stage == CorrectorStage::Two && !(params.delta > 0.0) {
            return invalid(format!("the stage-two corrector needs delta > 0, got {}", params.delta));
        }
        let symbols = SymbolTable::new(grid, &params)?;
        let one = ModeExp::build(grid, 4, cfg.dt, |k| stage_one_operator(k, &params))?;
        let two = match stage {
            CorrectorStage::One => None,
            CorrectorStage::Two => Some(ModeExp::build(grid, 7, cfg.dt, |k| stage_two_operator(k, &params))?),
        };
        Ok(Arc::new(CorrectorModel { grid: grid.clone(), params, cfg: *cfg, stage, symbols, one, two }))
    }

    /// `i(B₀·k)/|k|² v`, i.e. `(−Δ)⁻¹B₀·∇v`.
    fn slave_field(&self, v: &SpectralVector) -> SpectralVector {
        let mut out = SpectralVector::zeros(&self.grid);
        for &idx in self.grid.active() {
            let f = Complex64::new(0.0, self.symbols.mb[idx]);
            for a in 0..3 {
                out.comps[a].coeffs_mut()[idx] = f * v.comps[a].coeffs()[idx];
            }
        }
        out
    }

    /// Corrector state at time zero, matching the given full-system data.
    pub fn init(&self, u0: &SpectralVector, b0: Option<&SpectralVector>, theta0: &SpectralScalar) -> Result<CorrectorState> {
        let m_theta = self.symbols.velocity(theta0);
        let one = StageOne { layer: u0.sub(&m_theta), theta: theta0.clone() };
        match self.stage {
            CorrectorStage::One => {
                Ok(CorrectorState { stage: self.stage, u: u0.clone(), b: self.slave_field(u0), theta: theta0.clone(), time: 0.0, one, b_layer: None })
            }
            CorrectorStage::Two => {
                let b0 = b0.ok_or_else(|| crate::error::Error::InvalidArgument("stage two needs B(0)".into()))?;
                let b_layer = b0.sub(&self.slave_field(u0));
                Ok(CorrectorState {
                    stage: self.stage,
                    u: u0.clone(),
                    b: b0.clone(),
                    theta: theta0.clone(),
                    time: 0.0,
                    one,
                    b_layer: Some(b_layer),
                })
            }
        }
    }
}

pub struct CorrectorStepper {
    model: Arc<CorrectorModel>,
    tr: Transform,
    steps: u64,
}

impl CorrectorStepper {
    pub fn new(model: &Arc<CorrectorModel>) -> Self {
        CorrectorStepper { model: model.clone(), tr: Transform::new(&model.grid), steps: 0 }
    }

    fn stage_one_velocity(&self, one: &StageOne) -> SpectralVector {
        self.model.symbols.velocity(&one.theta).add(&one.layer)
    }

    fn step_one(&mut self, one: &StageOne, dw: Option<&SpectralScalar>) -> StageOne {
        let m = self.model.clone();
        let grid = &m.grid;
        let nt = if m.cfg.advection {
            let u = self.stage_one_velocity(one);
            advect(&u, &one.theta, &mut self.tr).scaled(-1.0)
        } else {
            SpectralScalar::zeros(grid)
        };
        let mut out = StageOne { layer: SpectralVector::zeros(grid), theta: SpectralScalar::zeros(grid) };
        let zero = Complex64::new(0.0, 0.0);
        let mut x = [zero; 4];
        let mut n = [zero; 4];
        let mut w = [zero; 4];
        let mut y = [zero; 4];
        for &idx in grid.active() {
            for a in 0..3 {
                x[a] = one.layer.comps[a].coeffs()[idx];
            }
            x[3] = one.theta.coeffs()[idx];
            n[3] = nt.coeffs()[idx];
            let wn = dw.map(|d| {
                w[3] = d.coeffs()[idx];
                &w[..]
            });
            m.one.apply(idx, &x, Some(&n), wn, &mut y);
            for a in 0..3 {
                out.layer.comps[a].coeffs_mut()[idx] = y[a];
            }
            out.theta.coeffs_mut()[idx] = y[3];
        }
        out
    }

    pub fn step(&mut self, s: &CorrectorState, dw: Option<&SpectralScalar>) -> Result<CorrectorState> {
        if s.stage != self.model.stage {
            return invalid("corrector state and model are for different stages");
        }
        let m = self.model.clone();
        let grid = m.grid.clone();
        let one = self.step_one(&s.one, dw);
        let out = match m.stage {
            CorrectorStage::One => {
                let u = self.stage_one_velocity(&one);
                let b = m.slave_field(&u);
                CorrectorState { stage: m.stage, u, b, theta: one.theta.clone(), time: s.time + m.cfg.dt, one, b_layer: None }
            }
            CorrectorStage::Two => {
                let b_layer = s.b_layer.as_ref().ok_or_else(|| crate::error::Error::InvalidArgument("stage-two state lacks its magnetic layer".into()))?;
                let (nu, nt) = if m.cfg.advection {
                    let ue = self.stage_one_velocity(&s.one);
                    let mut nu = advect_vector(&ue, &s.u, &mut self.tr);
                    nu.scale(-1.0);
                    leray_in_place(&mut nu);
                    (nu, advect(&s.u, &s.theta, &mut self.tr).scaled(-1.0))
                } else {
                    (SpectralVector::zeros(&grid), SpectralScalar::zeros(&grid))
                };
                let zero = Complex64::new(0.0, 0.0);
                let mut u = SpectralVector::zeros(&grid);
                let mut bl = SpectralVector::zeros(&grid);
                let mut th = SpectralScalar::zeros(&grid);
                let (mut x, mut n, mut w, mut y) = ([zero; 7], [zero; 7], [zero; 7], [zero; 7]);
                let prop = m.two.as_ref().expect("stage-two tables");
                for &idx in grid.active() {
                    for a in 0..3 {
                        x[a] = s.u.comps[a].coeffs()[idx];
                        x[3 + a] = b_layer.comps[a].coeffs()[idx];
                        n[a] = nu.comps[a].coeffs()[idx];
                    }
                    x[6] = s.theta.coeffs()[idx];
                    n[6] = nt.coeffs()[idx];
                    let wn = dw.map(|d| {
                        w[6] = d.coeffs()[idx];
                        &w[..]
                    });
                    prop.apply(idx, &x, Some(&n), wn, &mut y);
                    for a in 0..3 {
                        u.comps[a].coeffs_mut()[idx] = y[a];
                        bl.comps[a].coeffs_mut()[idx] = y[3 + a];
                    }
                    th.coeffs_mut()[idx] = y[6];
                }
                let b = bl.add(&m.slave_field(&u));
                CorrectorState { stage: m.stage, u, b, theta: th, time: s.time + m.cfg.dt, one, b_layer: Some(bl) }
            }
        };
        self.steps += 1;
        check_blowup(out.u.is_finite() && out.theta.is_finite() && out.u.max_abs() < 1e150, self.steps, None)?;
        Ok(out)
    }
}

/// One corrector step; builds the tables on every call.
pub fn step_corrector(
    stage: CorrectorStage,
    state: &CorrectorState,
    p: &PhysParams,
    cfg: &StepConfig,
    dw: Option<&SpectralScalar>,
) -> Result<CorrectorState> {
    let model = CorrectorModel::new(state.theta.grid(), p, cfg, stage)?;
    CorrectorStepper::new(&model).step(state, dw)
}
