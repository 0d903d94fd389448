//! Constitutive maps of the quasi-static limit.
//!
//! With `ε = δ = 0` the momentum and induction balances become linear algebraic
//! relations at each wavevector, so velocity and magnetic field are Fourier
//! multipliers applied to the temperature:
//!
//! ```text
//! M_u(k) = [ (ν|k|⁴ + (B₀·k)²) k×(e₃×k) + (Ω·k)|k|² (e₃×k) ] / D(k)
//! D(k)   = |k|²(Ω·k)² + ((B₀·k)² + ν|k|⁴)²
//! M_b(k) = i (B₀·k)/|k|² M_u(k)
//! ```
//!
//! [`apply_q_inverse_drive`] reaches the same velocity by solving the per-mode
//! 2×2 system on the plane orthogonal to `k`, which serves as an independent
//! route for cross-checks.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{SpectralScalar, SpectralVector};
use super::grid::{dot_k, norm_sq, Grid, Wavevector};
use crate::error::{invalid, Error, Result};

/// Physical parameters shared by the full system and its limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysParams {
    pub eps: f64,
    pub delta: f64,
    pub nu: f64,
    pub kappa: f64,
    /// Colatitude λ of the rotation axis.
    pub lambda: f64,
    /// Direction of the background field, normalized by [`PhysParams::validated`].
    pub b0: [f64; 3],
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams { eps: 0.1, delta: 0.1, nu: 0.1, kappa: 1.0, lambda: std::f64::consts::FRAC_PI_4, b0: [0.0, 0.0, 1.0] }
    }
}

impl PhysParams {
    /// Checks ranges and normalizes `b0`.
    pub fn validated(mut self) -> Result<Self> {
        if !(self.eps >= 0.0 && self.delta >= 0.0) {
            return invalid(format!("eps and delta must be non-negative, got {} and {}", self.eps, self.delta));
        }
        if !(self.nu > 0.0 && self.kappa > 0.0) || !self.nu.is_finite() || !self.kappa.is_finite() {
            return invalid(format!("nu and kappa must be positive, got {} and {}", self.nu, self.kappa));
        }
        if !self.lambda.is_finite() {
            return invalid("colatitude must be finite");
        }
        let r = self.b0.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("background field direction {:?} has no direction", self.b0));
        }
        for c in &mut self.b0 {
            *c /= r;
        }
        Ok(self)
    }

    /// Unit rotation axis `(0, -sin λ, cos λ)`.
    pub fn omega(&self) -> [f64; 3] {
        [0.0, -self.lambda.sin(), self.lambda.cos()]
    }

    pub fn with_eps_delta(mut self, eps: f64, delta: f64) -> Self {
        self.eps = eps;
        self.delta = delta;
        self
    }
}

fn check_k(k: Wavevector) -> Result<()> {
    if k == [0, 0, 0] {
        return invalid("wavevector must be nonzero");
    }
    Ok(())
}

/// Denominator `D(k)`.
pub fn symbol_d(k: Wavevector, p: &PhysParams) -> Result<f64> {
    check_k(k)?;
    let q = norm_sq(k);
    let ok = dot_k(p.omega(), k);
    let bk = dot_k(p.b0, k);
    let d = q * ok * ok + (bk * bk + p.nu * q * q).powi(2);
    if !(d > 0.0) {
        return Err(Error::NumericalDegeneracy(format!("D(k) = {d} at k = {k:?}")));
    }
    Ok(d)
}

/// Real vector symbol `M_u(k)`.
pub fn symbol_mu(k: Wavevector, p: &PhysParams) -> Result<[f64; 3]> {
    let d = symbol_d(k, p)?;
    let kv = Vector3::new(k[0] as f64, k[1] as f64, k[2] as f64);
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    let q = kv.norm_squared();
    let ok = dot_k(p.omega(), k);
    let bk = dot_k(p.b0, k);
    let e3xk = e3.cross(&kv);
    // k×(e₃×k) = e₃|k|² − k k₃, written out to keep integer inputs exact.
    let kxe3xk = Vector3::new(-kv[0] * kv[2], -kv[1] * kv[2], q - kv[2] * kv[2]);
    let m = (kxe3xk * (p.nu * q * q + bk * bk) + e3xk * (ok * q)) / d;
    Ok([m[0], m[1], m[2]])
}

/// Real factor `(B₀·k)/|k|²`; the magnetic symbol is `i` times this times `M_u(k)`.
pub fn symbol_mb_factor(k: Wavevector, p: &PhysParams) -> Result<f64> {
    check_k(k)?;
    Ok(dot_k(p.b0, k) / norm_sq(k))
}

/// Magnetic symbol `M_b(k)` as a complex vector.
pub fn symbol_mb(k: Wavevector, p: &PhysParams) -> Result<[Complex64; 3]> {
    let mu = symbol_mu(k, p)?;
    let f = symbol_mb_factor(k, p)?;
    Ok(mu.map(|c| Complex64::new(0.0, f * c)))
}

/// Symbols tabulated over a grid; zero outside the dealiasing mask.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub grid: Arc<Grid>,
    pub mu: Vec<[f64; 3]>,
    pub mb: Vec<f64>,
}

impl SymbolTable {
    pub fn new(grid: &Arc<Grid>, p: &PhysParams) -> Result<Self> {
        let mut mu = vec![[0.0; 3]; grid.len()];
        let mut mb = vec![0.0; grid.len()];
        for &idx in grid.active() {
            let k = grid.wavevector(idx);
            mu[idx] = symbol_mu(k, p)?;
            mb[idx] = symbol_mb_factor(k, p)?;
        }
        Ok(SymbolTable { grid: grid.clone(), mu, mb })
    }

    pub fn velocity(&self, theta: &SpectralScalar) -> SpectralVector {
        let mut u = SpectralVector::zeros(&self.grid);
        for &idx in self.grid.active() {
            let t = theta.coeffs()[idx];
            for a in 0..3 {
                u.comps[a].coeffs_mut()[idx] = t * self.mu[idx][a];
            }
        }
        u
    }

    pub fn magnetic(&self, theta: &SpectralScalar) -> SpectralVector {
        let mut b = SpectralVector::zeros(&self.grid);
        for &idx in self.grid.active() {
            let t = theta.coeffs()[idx] * Complex64::new(0.0, self.mb[idx]);
            for a in 0..3 {
                b.comps[a].coeffs_mut()[idx] = t * self.mu[idx][a];
            }
        }
        b
    }
}

/// `(M_u θ, M_b θ)`.
pub fn apply_constitutive(theta: &SpectralScalar, p: &PhysParams) -> Result<(SpectralVector, SpectralVector)> {
    let t = SymbolTable::new(theta.grid(), p)?;
    Ok((t.velocity(theta), t.magnetic(theta)))
}

/// `R θ = M_b θ`, the magnetic part of the constitutive map.
pub fn apply_r(theta: &SpectralScalar, p: &PhysParams) -> Result<SpectralVector> {
    Ok(SymbolTable::new(theta.grid(), p)?.magnetic(theta))
}

/// Orthonormal basis of the plane orthogonal to `k`.
fn transverse_basis(k: Wavevector) -> (Vector3<f64>, Vector3<f64>) {
    let kv = Vector3::new(k[0] as f64, k[1] as f64, k[2] as f64).normalize();
    let helper = if kv[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (helper - kv * kv.dot(&helper)).normalize();
    let e2 = kv.cross(&e1);
    (e1, e2)
}

/// `Q^{-1} P e₃ θ` with `Q = A − (B₀·∇)²(−Δ)^{-1}`, solved mode by mode.
///
/// On the plane orthogonal to `k` the per-mode operator is
/// `ν|k|² + (B₀·k)²/|k|²` times the identity plus the restricted rotation term.
pub fn apply_q_inverse_drive(theta: &SpectralScalar, p: &PhysParams) -> Result<SpectralVector> {
    let grid = theta.grid().clone();
    let om = Vector3::from(p.omega());
    let e3 = Vector3::z();
    let mut u = SpectralVector::zeros(&grid);
    for &idx in grid.active() {
        let k = grid.wavevector(idx);
        let (e1, e2) = transverse_basis(k);
        let q = norm_sq(k);
        let bk = dot_k(p.b0, k);
        let diag = p.nu * q + bk * bk / q;
        let apply = |v: &Vector3<f64>| v * diag + om.cross(v);
        let basis = [e1, e2];
        let mut m = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                m[(a, b)] = basis[a].dot(&apply(&basis[b]));
            }
        }
        let det = m.determinant();
        if !(det.abs() > 1e-300) {
            return Err(Error::NumericalDegeneracy(format!("singular Q block at k = {k:?}")));
        }
        let inv = m.try_inverse().ok_or_else(|| Error::NumericalDegeneracy(format!("singular Q block at k = {k:?}")))?;
        let rhs = nalgebra::Vector2::new(e1.dot(&e3), e2.dot(&e3));
        let c = inv * rhs;
        let t = theta.coeffs()[idx];
        let dir = e1 * c[0] + e2 * c[1];
        for a in 0..3 {
            u.comps[a].coeffs_mut()[idx] = t * dir[a];
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nu: f64, lambda: f64, b0: [f64; 3]) -> PhysParams {
        PhysParams { nu, lambda, b0, ..Default::default() }.validated().unwrap()
    }

    #[test]
    fn e1_with_vertical_field() {
        // Ω·e₁ = 0, B₀·e₁ = 0, so D = ν², e₁×(e₃×e₁) = e₃ and M_u(e₁) = ν e₃ / ν² = e₃/ν.
        let p = params(0.1, 0.3, [0.0, 0.0, 1.0]);
        let m = symbol_mu([1, 0, 0], &p).unwrap();
        assert!((m[0]).abs() < 1e-15 && (m[1]).abs() < 1e-15);
        assert!((m[2] - 10.0).abs() < 1e-12);
        let mb = symbol_mb([1, 0, 0], &p).unwrap();
        assert!(mb.iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn symbol_is_divergence_free_and_odd_rules() {
        let p = params(0.07, 0.9, [0.3, -0.2, 1.0]);
        for k in [[1, 2, 3], [-2, 0, 1], [0, 0, 1], [4, -1, -1]] {
            let m = symbol_mu(k, &p).unwrap();
            let kd: f64 = (0..3).map(|a| m[a] * k[a] as f64).sum();
            assert!(kd.abs() < 1e-14);
            let mneg = symbol_mu([-k[0], -k[1], -k[2]], &p).unwrap();
            for a in 0..3 {
                assert!((m[a] - mneg[a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn vertical_wavevector_gives_zero_velocity() {
        let p = params(0.1, 0.5, [0.0, 0.0, 1.0]);
        let m = symbol_mu([0, 0, 3], &p).unwrap();
        assert!(m.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn zero_wavevector_rejected() {
        let p = PhysParams::default();
        assert!(symbol_d([0, 0, 0], &p).is_err());
        assert!(symbol_mu([0, 0, 0], &p).is_err());
    }

    #[test]
    fn q_solve_matches_symbol() {
        let g = Grid::new(8).unwrap();
        let p = params(0.05, 1.1, [1.0, 0.5, 0.2]);
        let theta = SpectralScalar::single_mode(&g, [1, -2, 1], 1, 1.0)
            .unwrap()
            .add(&SpectralScalar::single_mode(&g, [0, 1, 2], 0, 0.5).unwrap());
        let (u, _) = apply_constitutive(&theta, &p).unwrap();
        let uq = apply_q_inverse_drive(&theta, &p).unwrap();
        assert!(u.sub(&uq).l2() < 1e-13 * u.l2());
    }

    #[test]
    fn validation() {
        assert!(PhysParams { nu: 0.0, ..Default::default() }.validated().is_err());
        assert!(PhysParams { b0: [0.0; 3], ..Default::default() }.validated().is_err());
        let p = PhysParams { b0: [0.0, 3.0, 4.0], ..Default::default() }.validated().unwrap();
        assert!((p.b0[1] - 0.6).abs() < 1e-15);
    }
}
