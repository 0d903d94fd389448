use std::sync::Arc;

use crate::error::{invalid, Result};

/// Wavenumber triple on the lattice Z^3.
pub type Wavevector = [i32; 3];

/// Periodic grid of `n^3` points on `[0, 2π)^3` with its Fourier index tables.
///
/// Linear storage index is `(i0 * n + i1) * n + i2`, the last axis varying fastest.
/// Axis index `i` carries wavenumber `i` for `i <= n/2` and `i - n` otherwise.
#[derive(Debug)]
pub struct Grid {
    n: usize,
    wavevectors: Vec<Wavevector>,
    k2: Vec<f64>,
    mask: Vec<bool>,
    mirror: Vec<usize>,
    active: Vec<usize>,
}

impl Grid {
    /// Builds the grid for an even `n >= 4`.
    pub fn new(n: usize) -> Result<Arc<Grid>> {
        if n < 4 || n % 2 != 0 {
            return invalid(format!("grid size must be even and at least 4, got {n}"));
        }
        if n > 1024 {
            return invalid(format!("grid size {n} exceeds the supported maximum of 1024"));
        }
        let len = n * n * n;
        let mut wavevectors = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        let mut mirror = Vec::with_capacity(len);
        let wn = |i: usize| -> i32 {
            if i <= n / 2 {
                i as i32
            } else {
                i as i32 - n as i32
            }
        };
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let k = [wn(i0), wn(i1), wn(i2)];
                    wavevectors.push(k);
                    k2.push(norm_sq(k));
                    let keep = k != [0, 0, 0] && k.iter().all(|&c| 3 * c.unsigned_abs() as usize <= n);
                    // The Nyquist plane has no partner under k -> -k; 3|k| <= n excludes it for n >= 4.
                    mask.push(keep);
                    let m = |i: usize| (n - i) % n;
                    mirror.push((m(i0) * n + m(i1)) * n + m(i2));
                }
            }
        }
        let active = (0..len).filter(|&i| mask[i]).collect();
        Ok(Arc::new(Grid { n, wavevectors, k2, mask, mirror, active }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points, `n^3`.
    pub fn len(&self) -> usize {
        self.wavevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavevectors.is_empty()
    }

    pub fn wavevector(&self, idx: usize) -> Wavevector {
        self.wavevectors[idx]
    }

    pub fn wavevectors(&self) -> &[Wavevector] {
        &self.wavevectors
    }

    /// `|k|^2` for each storage index.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Two-thirds dealiasing mask; the zero mode is always excluded.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Storage indices where the mask is set, in increasing order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Storage index of `-k`.
    pub fn mirror(&self, idx: usize) -> usize {
        self.mirror[idx]
    }

    /// Largest retained wavenumber component, `floor(n/3)`.
    pub fn kmax(&self) -> i32 {
        (self.n / 3) as i32
    }

    /// Storage index of wavevector `k`, if it is representable.
    pub fn index_of(&self, k: Wavevector) -> Option<usize> {
        let n = self.n as i32;
        let mut idx = 0usize;
        for c in k {
            if c > n / 2 || c <= -n / 2 {
                return None;
            }
            let i = if c >= 0 { c } else { c + n };
            idx = idx * self.n + i as usize;
        }
        Some(idx)
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        [(idx / (n * n)) as f64 * h, ((idx / n) % n) as f64 * h, (idx % n) as f64 * h]
    }
}

pub fn norm_sq(k: Wavevector) -> f64 {
    k.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

pub fn dot_k(a: [f64; 3], k: Wavevector) -> f64 {
    a[0] * k[0] as f64 + a[1] * k[1] as f64 + a[2] * k[2] as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_small_sizes() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(2).is_err());
        assert!(Grid::new(0).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid::new(8).unwrap();
        assert_eq!(g.wavevector(0), [0, 0, 0]);
        assert_eq!(g.wavevector(1), [0, 0, 1]);
        assert_eq!(g.wavevector(4), [0, 0, 4]);
        assert_eq!(g.wavevector(5), [0, 0, -3]);
        assert_eq!(g.wavevector(8), [0, 1, 0]);
        for idx in 0..g.len() {
            assert_eq!(g.index_of(g.wavevector(idx)), Some(idx));
        }
    }

    #[test]
    fn mask_is_symmetric_and_drops_high_modes() {
        let g = Grid::new(8).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.mask()[idx], g.mask()[g.mirror(idx)]);
            let k = g.wavevector(idx);
            let expected = k != [0, 0, 0] && k.iter().all(|c| c.abs() <= 2);
            assert_eq!(g.mask()[idx], expected, "{k:?}");
        }
        assert_eq!(g.active().len(), 5 * 5 * 5 - 1);
    }

    #[test]
    fn mirror_negates() {
        let g = Grid::new(6).unwrap();
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            let m = g.wavevector(g.mirror(idx));
            if k.iter().all(|&c| c.abs() < 3) {
                assert_eq!(m, [-k[0], -k[1], -k[2]]);
            }
        }
    }
}
