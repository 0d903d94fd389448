use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::grid::{Grid, Wavevector};

/// Per-mode exponential integrator tables for a linear system `X' = L_k X + N`.
///
/// For each retained wavevector this stores `exp(L dt)`, `dt φ₁(L dt)` with
/// `φ₁(z) = (e^z − 1)/z`, and `exp(L dt/2)`. Only one of each `±k` pair is
/// computed; its partner is the complex conjugate, which keeps real fields real.
pub(crate) struct ModeExp {
    pub dim: usize,
    slot: Vec<usize>,
    e: Vec<Complex64>,
    phi: Vec<Complex64>,
    half: Vec<Complex64>,
}

const NONE: usize = usize::MAX;

pub(crate) fn exp_phi(l: &DMatrix<Complex64>, dt: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let d = l.nrows();
    let mut aug = DMatrix::<Complex64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            aug[(i, j)] = l[(i, j)] * dt;
        }
        aug[(i, d + i)] = Complex64::new(1.0, 0.0);
    }
    let ex = aug.exp();
    let e = ex.view((0, 0), (d, d)).into_owned();
    let phi = ex.view((0, d), (d, d)).into_owned() * Complex64::new(dt, 0.0);
    (e, phi)
}

impl ModeExp {
    pub fn build<F>(grid: &Arc<Grid>, dim: usize, dt: f64, op: F) -> Result<Self>
    where
        F: Fn(Wavevector) -> DMatrix<Complex64>,
    {
        let mut slot = vec![NONE; grid.len()];
        let mut e = Vec::new();
        let mut phi = Vec::new();
        let mut half = Vec::new();
        let mut count = 0;
        for &idx in grid.active() {
            let m = grid.mirror(idx);
            if m < idx {
                continue;
            }
            let l = op(grid.wavevector(idx));
            let (ei, pi) = exp_phi(&l, dt);
            let hi = (l * Complex64::new(0.5 * dt, 0.0)).exp();
            for mat in [&ei, &pi, &hi] {
                if mat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(Error::NumericalDegeneracy(format!(
                        "non-finite propagator at k = {:?}",
                        grid.wavevector(idx)
                    )));
                }
            }
            let push = |dst: &mut Vec<Complex64>, mat: &DMatrix<Complex64>| {
                for i in 0..dim {
                    for j in 0..dim {
                        dst.push(mat[(i, j)]);
                    }
                }
            };
            // Slot 2c holds +k, slot 2c+1 its conjugate partner.
            push(&mut e, &ei);
            push(&mut phi, &pi);
            push(&mut half, &hi);
            push(&mut e, &ei.map(|c| c.conj()));
            push(&mut phi, &pi.map(|c| c.conj()));
            push(&mut half, &hi.map(|c| c.conj()));
            slot[idx] = 2 * count;
            if m != idx {
                slot[m] = 2 * count + 1;
            }
            count += 1;
        }
        Ok(ModeExp { dim, slot, e, phi, half })
    }

    fn mat<'a>(&self, table: &'a [Complex64], idx: usize) -> Option<&'a [Complex64]> {
        let s = self.slot[idx];
        if s == NONE {
            return None;
        }
        let d2 = self.dim * self.dim;
        Some(&table[s * d2..(s + 1) * d2])
    }

    /// `out = E x + Φ n + H w` at storage index `idx`; terms with `None` are skipped.
    pub fn apply(&self, idx: usize, x: &[Complex64], n: Option<&[Complex64]>, w: Option<&[Complex64]>, out: &mut [Complex64]) {
        let d = self.dim;
        let Some(e) = self.mat(&self.e, idx) else {
            out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
            return;
        };
        for i in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..d {
                acc += e[i * d + j] * x[j];
            }
            out[i] = acc;
        }
        if let Some(n) = n {
            let p = self.mat(&self.phi, idx).unwrap();
            for i in 0..d {
                for j in 0..d {
                    out[i] += p[i * d + j] * n[j];
                }
            }
        }
        if let Some(w) = w {
            let h = self.mat(&self.half, idx).unwrap();
            for i in 0..d {
                for j in 0..d {
                    out[i] += h[i * d + j] * w[j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_phi_matches_closed_form() {
        let l = DMatrix::from_element(1, 1, Complex64::new(-3.0, 2.0));
        let dt = 0.1;
        let (e, phi) = exp_phi(&l, dt);
        let z = Complex64::new(-0.3, 0.2);
        assert!((e[(0, 0)] - z.exp()).norm() < 1e-14);
        assert!((phi[(0, 0)] - dt * (z.exp() - 1.0) / z).norm() < 1e-14);
    }

    #[test]
    fn phi_of_zero_is_dt() {
        let l = DMatrix::<Complex64>::zeros(2, 2);
        let (e, phi) = exp_phi(&l, 0.25);
        assert!((e[(1, 1)] - 1.0).norm() < 1e-15);
        assert!((phi[(0, 0)] - 0.25).norm() < 1e-15);
        assert!(phi[(0, 1)].norm() < 1e-15);
    }
}
