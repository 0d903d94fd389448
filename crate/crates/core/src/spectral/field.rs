use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::{Grid, Wavevector};
use crate::error::{invalid, Error, Result};

/// `(2π)^3`, the volume of the torus.
pub const VOLUME: f64 = 8.0 * PI * PI * PI;

/// Real scalar field stored as Fourier coefficients of `e^{ik·x}`.
///
/// Coefficients are Hermitian (`f_{-k} = conj f_k`) and vanish outside the
/// dealiasing mask, including at `k = 0`.
#[derive(Clone, Debug)]
pub struct SpectralScalar {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralScalar { grid: grid.clone(), coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Wraps raw coefficients, checking length, Hermitian symmetry and support.
    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return invalid(format!("expected {} coefficients, got {}", grid.len(), coeffs.len()));
        }
        let f = SpectralScalar { grid: grid.clone(), coeffs };
        f.check_valid(1e-12)?;
        Ok(f)
    }

    pub(crate) fn from_coeffs_unchecked(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        SpectralScalar { grid: grid.clone(), coeffs }
    }

    /// The real mode `σ_k^0 = cos(k·x)` (`parity = 0`) or `σ_k^1 = sin(k·x)`, scaled.
    pub fn single_mode(grid: &Arc<Grid>, k: Wavevector, parity: u8, amplitude: f64) -> Result<Self> {
        let idx = grid
            .index_of(k)
            .filter(|&i| grid.mask()[i])
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k:?} is not retained on an n={} grid", grid.n())))?;
        let mut f = Self::zeros(grid);
        let half = 0.5 * amplitude;
        let c = match parity {
            0 => Complex64::new(half, 0.0),
            1 => Complex64::new(0.0, -half),
            _ => return invalid(format!("parity must be 0 or 1, got {parity}")),
        };
        f.coeffs[idx] += c;
        f.coeffs[grid.mirror(idx)] += c.conj();
        Ok(f)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn same_grid(&self, other: &SpectralScalar) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.n() == other.grid.n()
    }

    /// Maximum Hermitian defect `max |f_k - conj f_{-k}|`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        (0..g.len())
            .map(|i| (self.coeffs[i] - self.coeffs[g.mirror(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum coefficient magnitude outside the dealiasing mask.
    pub fn unmasked_mass(&self) -> f64 {
        let m = self.grid.mask();
        self.coeffs
            .iter()
            .zip(m)
            .filter(|(_, &keep)| !keep)
            .map(|(c, _)| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn check_valid(&self, tol: f64) -> Result<()> {
        let scale = self.max_abs().max(1.0);
        if self.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("field contains non-finite coefficients");
        }
        if self.hermitian_defect() > tol * scale {
            return invalid("field coefficients are not Hermitian-symmetric");
        }
        if self.unmasked_mass() > tol * scale {
            return invalid("field has energy outside the dealiasing mask or in the mean");
        }
        Ok(())
    }

    /// Replaces the coefficients by their Hermitian part and zeroes masked-out modes.
    pub fn symmetrize(&mut self) {
        let g = self.grid.clone();
        for i in 0..g.len() {
            if !g.mask()[i] {
                self.coeffs[i] = Complex64::new(0.0, 0.0);
                continue;
            }
            let j = g.mirror(i);
            if i < j {
                let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
                self.coeffs[i] = avg;
                self.coeffs[j] = avg.conj();
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralScalar) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    pub fn sub(&self, other: &SpectralScalar) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralScalar) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// `L^2(T^3)` inner product.
    pub fn dot(&self, other: &SpectralScalar) -> f64 {
        VOLUME * self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>()
    }

    /// `‖f‖²_{L²}` by Parseval.
    pub fn l2_sq(&self) -> f64 {
        VOLUME * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    /// Homogeneous `‖f‖²_{H^s} = (2π)^3 Σ |k|^{2s} |f_k|^2`.
    pub fn hs_sq(&self, s: f64) -> f64 {
        let k2 = self.grid.k2();
        VOLUME
            * self
                .coeffs
                .iter()
                .zip(k2)
                .filter(|(_, &q)| q > 0.0)
                .map(|(c, &q)| q.powf(s) * c.norm_sqr())
                .sum::<f64>()
    }

    /// `‖∇f‖²_{L²}`.
    pub fn h1_sq(&self) -> f64 {
        let k2 = self.grid.k2();
        VOLUME * self.coeffs.iter().zip(k2).map(|(c, &q)| q * c.norm_sqr()).sum::<f64>()
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for (c, &q) in out.coeffs.iter_mut().zip(self.grid.k2()) {
            *c *= -q;
        }
        out
    }

    /// `∂_axis f`.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = self.clone();
        for (c, k) in out.coeffs.iter_mut().zip(self.grid.wavevectors()) {
            *c *= Complex64::new(0.0, k[axis] as f64);
        }
        out
    }

    pub fn gradient(&self) -> SpectralVector {
        SpectralVector::new([self.derivative(0), self.derivative(1), self.derivative(2)])
    }

    /// Coefficient of the real mode `σ_k^m` in the expansion of `f`.
    pub fn mode_coordinate(&self, k: Wavevector, parity: u8) -> f64 {
        match self.grid.index_of(k) {
            Some(i) => {
                let c = self.coeffs[i];
                if parity == 0 {
                    2.0 * c.re
                } else {
                    -2.0 * c.im
                }
            }
            None => 0.0,
        }
    }
}

/// Real 3-vector field, one [`SpectralScalar`] per component.
#[derive(Clone, Debug)]
pub struct SpectralVector {
    pub comps: [SpectralScalar; 3],
}

impl SpectralVector {
    pub fn new(comps: [SpectralScalar; 3]) -> Self {
        SpectralVector { comps }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralVector::new([SpectralScalar::zeros(grid), SpectralScalar::zeros(grid), SpectralScalar::zeros(grid)])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.comps[0].grid()
    }

    pub fn l2_sq(&self) -> f64 {
        self.comps.iter().map(SpectralScalar::l2_sq).sum()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    pub fn h1_sq(&self) -> f64 {
        self.comps.iter().map(SpectralScalar::h1_sq).sum()
    }

    pub fn hs_sq(&self, s: f64) -> f64 {
        self.comps.iter().map(|c| c.hs_sq(s)).sum()
    }

    pub fn dot(&self, other: &SpectralVector) -> f64 {
        (0..3).map(|i| self.comps[i].dot(&other.comps[i])).sum()
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralVector) {
        for i in 0..3 {
            self.comps[i].axpy(a, &other.comps[i]);
        }
    }

    pub fn sub(&self, other: &SpectralVector) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralVector) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            c.scale(a);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(SpectralScalar::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(SpectralScalar::max_abs).fold(0.0, f64::max)
    }

    /// Maximum of `|k · v_k|` over all modes.
    pub fn divergence_defect(&self) -> f64 {
        let g = self.grid();
        (0..g.len())
            .map(|i| {
                let k = g.wavevector(i);
                (0..3).map(|a| k[a] as f64 * self.comps[a].coeffs()[i]).sum::<Complex64>().norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn check_valid(&self, tol: f64) -> Result<()> {
        for c in &self.comps {
            c.check_valid(tol)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cosine_norm() {
        let g = Grid::new(8).unwrap();
        let f = SpectralScalar::single_mode(&g, [1, 0, 0], 0, 1.0).unwrap();
        let expected = (2.0 * PI).powf(1.5) / 2f64.sqrt();
        assert!((f.l2() - expected).abs() < 1e-12);
        assert_eq!(f.hermitian_defect(), 0.0);
        assert!((f.mode_coordinate([1, 0, 0], 0) - 1.0).abs() < 1e-15);
        assert_eq!(f.mode_coordinate([1, 0, 0], 1), 0.0);
    }

    #[test]
    fn sine_mode_coordinate() {
        let g = Grid::new(8).unwrap();
        let f = SpectralScalar::single_mode(&g, [0, 1, -2], 1, 3.0).unwrap();
        assert!((f.mode_coordinate([0, 1, -2], 1) - 3.0).abs() < 1e-15);
        assert!((f.mode_coordinate([0, -1, 2], 1) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unretained_mode() {
        let g = Grid::new(8).unwrap();
        assert!(SpectralScalar::single_mode(&g, [3, 0, 0], 0, 1.0).is_err());
        assert!(SpectralScalar::single_mode(&g, [0, 0, 0], 0, 1.0).is_err());
        assert!(SpectralScalar::single_mode(&g, [1, 0, 0], 2, 1.0).is_err());
    }

    #[test]
    fn from_coeffs_validates() {
        let g = Grid::new(4).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); g.len()];
        c[1] = Complex64::new(1.0, 0.0);
        assert!(SpectralScalar::from_coeffs(&g, c.clone()).is_err());
        c[g.mirror(1)] = Complex64::new(1.0, 0.0);
        assert!(SpectralScalar::from_coeffs(&g, c).is_ok());
    }

    #[test]
    fn gradient_of_mode_is_orthogonal_to_it() {
        let g = Grid::new(8).unwrap();
        let f = SpectralScalar::single_mode(&g, [1, 2, 0], 0, 1.0).unwrap();
        let grad = f.gradient();
        assert!((grad.h1_sq() - f.hs_sq(2.0)).abs() < 1e-9);
        assert!((f.h1_sq() - 5.0 * f.l2_sq()).abs() < 1e-9);
    }
}
