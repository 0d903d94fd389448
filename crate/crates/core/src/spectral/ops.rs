use num_complex::Complex64;

use super::field::{SpectralScalar, SpectralVector, VOLUME};
use super::transform::Transform;
use crate::error::{invalid, Result};

/// Norms available through [`norm`] and [`vector_norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    /// `L^2` via Parseval.
    L2,
    /// Homogeneous Sobolev norm `(Σ |k|^{2s} |f_k|^2)^{1/2}` times `(2π)^{3/2}`.
    Hs(f64),
    /// `L^p` by trapezoidal quadrature on the grid, `p >= 1`.
    Lp(f64),
}

pub fn norm(f: &SpectralScalar, kind: NormKind, tr: &mut Transform) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(f.l2()),
        NormKind::Hs(s) => Ok(f.hs_sq(s).sqrt()),
        NormKind::Lp(p) => {
            check_p(p)?;
            Ok(lp_of_values(&tr.inverse(f), p))
        }
    }
}

/// Norm of the pointwise magnitude `|v(x)|` for `L^p`, componentwise sum of squares otherwise.
pub fn vector_norm(v: &SpectralVector, kind: NormKind, tr: &mut Transform) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(v.l2()),
        NormKind::Hs(s) => Ok(v.hs_sq(s).sqrt()),
        NormKind::Lp(p) => {
            check_p(p)?;
            let vals = tr.inverse_many(&[&v.comps[0], &v.comps[1], &v.comps[2]]);
            let mag: Vec<f64> =
                (0..vals[0].len()).map(|i| (vals[0][i].powi(2) + vals[1][i].powi(2) + vals[2][i].powi(2)).sqrt()).collect();
            Ok(lp_of_values(&mag, p))
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("L^p exponent must be a finite number >= 1, got {p}"));
    }
    Ok(())
}

/// `(∫ |f|^p)^{1/p}` from equispaced samples on the torus.
pub fn lp_of_values(values: &[f64], p: f64) -> f64 {
    let w = VOLUME / values.len() as f64;
    (w * values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Leray projection onto divergence-free fields, `P_k v = v - k (k·v)/|k|^2`.
pub fn leray_project(v: &SpectralVector) -> SpectralVector {
    let mut out = v.clone();
    leray_in_place(&mut out);
    out
}

pub fn leray_in_place(v: &mut SpectralVector) {
    let grid = v.grid().clone();
    for (idx, k) in grid.wavevectors().iter().enumerate() {
        let q = grid.k2()[idx];
        if q == 0.0 {
            for c in &mut v.comps {
                c.coeffs_mut()[idx] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let kd: Complex64 = (0..3).map(|a| k[a] as f64 * v.comps[a].coeffs()[idx]).sum();
        let r = kd / q;
        for a in 0..3 {
            v.comps[a].coeffs_mut()[idx] -= r * k[a] as f64;
        }
    }
}

/// Dealiased pseudo-spectral product `v·∇s`.
pub fn advect(v: &SpectralVector, s: &SpectralScalar, tr: &mut Transform) -> SpectralScalar {
    let g = s.gradient();
    let vals = tr.inverse_many(&[&v.comps[0], &v.comps[1], &v.comps[2], &g.comps[0], &g.comps[1], &g.comps[2]]);
    let prod: Vec<f64> =
        (0..vals[0].len()).map(|i| vals[0][i] * vals[3][i] + vals[1][i] * vals[4][i] + vals[2][i] * vals[5][i]).collect();
    tr.forward(&prod)
}

/// Componentwise `v·∇w`.
pub fn advect_vector(v: &SpectralVector, w: &SpectralVector, tr: &mut Transform) -> SpectralVector {
    SpectralVector::new([advect(v, &w.comps[0], tr), advect(v, &w.comps[1], tr), advect(v, &w.comps[2], tr)])
}

/// `∇·F` for a field given by its three flux components.
pub(crate) fn divergence(flux: [&SpectralScalar; 3]) -> SpectralScalar {
    let grid = flux[0].grid().clone();
    let mut out = SpectralScalar::zeros(&grid);
    let oc = out.coeffs_mut();
    for (idx, k) in grid.wavevectors().iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..3 {
            acc += k[a] as f64 * flux[a].coeffs()[idx];
        }
        oc[idx] = Complex64::new(-acc.im, acc.re);
    }
    out
}
