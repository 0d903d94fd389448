use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::SpectralScalar;
use super::grid::Grid;

/// 3D FFT workspace bound to one grid. Not shareable across threads; build one per worker.
///
/// `inverse` evaluates `f(x) = Σ_k f_k e^{ik·x}` on the grid and `forward` is its exact
/// inverse, carrying the `1/n^3` factor.
pub struct Transform {
    grid: Arc<Grid>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Transform {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Transform {
            grid: grid.clone(),
            fwd,
            inv,
            buf: vec![Complex64::new(0.0, 0.0); grid.len()],
            tmp: vec![Complex64::new(0.0, 0.0); grid.len()],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Transforms `self.buf` in place along all three axes.
    fn run(&mut self, inverse: bool) {
        let n = self.grid.n();
        let plan = if inverse { &self.inv } else { &self.fwd };
        for _ in 0..3 {
            plan.process_with_scratch(&mut self.buf, &mut self.scratch);
            // (a, b, c) -> (c, a, b): the old middle axis becomes the contiguous one.
            for a in 0..n {
                for b in 0..n {
                    let src = (a * n + b) * n;
                    for c in 0..n {
                        self.tmp[(c * n + a) * n + b] = self.buf[src + c];
                    }
                }
            }
            std::mem::swap(&mut self.buf, &mut self.tmp);
        }
    }

    /// Complex grid values of arbitrary coefficients.
    pub fn inverse_raw(&mut self, coeffs: &[Complex64]) -> Vec<Complex64> {
        self.buf.copy_from_slice(coeffs);
        self.run(true);
        self.buf.clone()
    }

    /// Raw coefficients of arbitrary complex grid values, without masking.
    pub fn forward_raw(&mut self, values: &[Complex64]) -> Vec<Complex64> {
        self.buf.copy_from_slice(values);
        self.run(false);
        let s = 1.0 / self.grid.len() as f64;
        self.buf.iter().map(|c| c * s).collect()
    }

    /// Real grid values of a field.
    pub fn inverse(&mut self, f: &SpectralScalar) -> Vec<f64> {
        self.buf.copy_from_slice(f.coeffs());
        self.run(true);
        self.buf.iter().map(|c| c.re).collect()
    }

    /// Real grid values of two fields with a single complex transform.
    pub fn inverse_pair(&mut self, f: &SpectralScalar, g: &SpectralScalar) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        for ((b, a), c) in self.buf.iter_mut().zip(f.coeffs()).zip(g.coeffs()) {
            *b = a + i * c;
        }
        self.run(true);
        (self.buf.iter().map(|c| c.re).collect(), self.buf.iter().map(|c| c.im).collect())
    }

    /// Coefficients of real grid values, restricted to the dealiasing mask.
    pub fn forward(&mut self, values: &[f64]) -> SpectralScalar {
        for (b, &v) in self.buf.iter_mut().zip(values) {
            *b = Complex64::new(v, 0.0);
        }
        self.run(false);
        let s = 1.0 / self.grid.len() as f64;
        let mask = self.grid.mask();
        let coeffs = self.buf.iter().zip(mask).map(|(c, &m)| if m { c * s } else { Complex64::new(0.0, 0.0) }).collect();
        let mut out = SpectralScalar::from_coeffs_unchecked(&self.grid, coeffs);
        out.symmetrize();
        out
    }

    /// Masked coefficients of two real grid functions with a single complex transform.
    pub fn forward_pair(&mut self, f: &[f64], g: &[f64]) -> (SpectralScalar, SpectralScalar) {
        for ((b, &x), &y) in self.buf.iter_mut().zip(f).zip(g) {
            *b = Complex64::new(x, y);
        }
        self.run(false);
        let s = 0.5 / self.grid.len() as f64;
        let grid = self.grid.clone();
        let mut a = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut b = vec![Complex64::new(0.0, 0.0); grid.len()];
        for &idx in grid.active() {
            let p = self.buf[idx];
            let q = self.buf[grid.mirror(idx)].conj();
            a[idx] = (p + q) * s;
            b[idx] = (p - q) * Complex64::new(0.0, -s);
        }
        (SpectralScalar::from_coeffs_unchecked(&grid, a), SpectralScalar::from_coeffs_unchecked(&grid, b))
    }

    /// Grid values of several fields, pairing them up to halve the transform count.
    pub fn inverse_many(&mut self, fields: &[&SpectralScalar]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(fields.len());
        let mut chunks = fields.chunks(2);
        for chunk in &mut chunks {
            if chunk.len() == 2 {
                let (a, b) = self.inverse_pair(chunk[0], chunk[1]);
                out.push(a);
                out.push(b);
            } else {
                out.push(self.inverse(chunk[0]));
            }
        }
        out
    }

    /// Masked coefficients of several real grid functions.
    pub fn forward_many(&mut self, values: &[Vec<f64>]) -> Vec<SpectralScalar> {
        let mut out = Vec::with_capacity(values.len());
        for chunk in values.chunks(2) {
            if chunk.len() == 2 {
                let (a, b) = self.forward_pair(&chunk[0], &chunk[1]);
                out.push(a);
                out.push(b);
            } else {
                out.push(self.forward(&chunk[0]));
            }
        }
        out
    }
}
