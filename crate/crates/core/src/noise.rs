//! Additive Gaussian forcing of the temperature equation.
//!
//! The forcing is `σ dW = Σ α_{k,m} σ_k^m(x) dW^{k,m}` over a finite list of real
//! modes `σ_k^0 = cos(k·x)`, `σ_k^1 = sin(k·x)`. Increments are drawn from a
//! counter-based generator keyed on `(seed, k, m)` with stream `traj` and word
//! position derived from `step`, so any increment can be regenerated in isolation
//! and trajectories sharing a `traj` id see the same noise path.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::field::VOLUME;
use crate::spectral::grid::{norm_sq, Grid, Wavevector};
use crate::spectral::{SpectralScalar, Transform};

/// One forced mode with its amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseEntry {
    pub k: Wavevector,
    pub parity: u8,
    pub alpha: f64,
}

/// Forcing specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub entries: Vec<NoiseEntry>,
    pub seed: u64,
}

/// Canonical representative of `±k`: the first nonzero component is positive.
pub fn canonical_k(k: Wavevector) -> (Wavevector, bool) {
    let first = k.iter().copied().find(|&c| c != 0).unwrap_or(0);
    if first < 0 {
        ([-k[0], -k[1], -k[2]], true)
    } else {
        (k, false)
    }
}

impl NoiseConfig {
    pub fn new(entries: Vec<NoiseEntry>, seed: u64) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.k == [0, 0, 0] {
                return invalid("forcing mode k = 0 is not allowed");
            }
            if e.parity > 1 {
                return invalid(format!("forcing parity must be 0 or 1, got {}", e.parity));
            }
            if !e.alpha.is_finite() {
                return invalid("forcing amplitude must be finite");
            }
            if canonical_k(e.k).1 {
                return invalid(format!("forcing mode {:?} is not in canonical form (first nonzero component positive)", e.k));
            }
            if !seen.insert((e.k, e.parity)) {
                return invalid(format!("forcing mode {:?} with parity {} listed twice", e.k, e.parity));
            }
        }
        Ok(NoiseConfig { entries, seed })
    }

    /// Both parities of `e₁, e₂, e₃`, each with amplitude `alpha`.
    pub fn unit_axes(alpha: f64, seed: u64) -> Self {
        let mut entries = Vec::new();
        for k in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            for parity in 0..2 {
                entries.push(NoiseEntry { k, parity, alpha });
            }
        }
        NoiseConfig { entries, seed }
    }

    pub fn zero(seed: u64) -> Self {
        NoiseConfig { entries: Vec::new(), seed }
    }

    /// Hilbert–Schmidt norm squared, `Σ α² ‖σ_k^m‖²_{L²}`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.alpha * e.alpha * VOLUME / 2.0).sum()
    }

    /// `Σ α² |k|²‖σ_k^m‖²`, the forcing strength measured in `H¹`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.alpha * e.alpha * norm_sq(e.k) * VOLUME / 2.0).sum()
    }

    pub fn max_k_component(&self) -> i32 {
        self.entries.iter().flat_map(|e| e.k.iter().map(|c| c.abs())).max().unwrap_or(0)
    }
}

/// `‖σ‖_{L^p} = ‖(Σ |α σ_k^m|²)^{1/2}‖_{L^p}`.
///
/// For `p = 2` this is the Hilbert–Schmidt value; otherwise the integral is
/// approximated by the trapezoidal rule on a grid fine enough to resolve the
/// integrand's low-frequency structure.
pub fn sigma_norm(cfg: &NoiseConfig, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("L^p exponent must be finite and >= 1, got {p}"));
    }
    if p == 2.0 {
        return Ok(cfg.hs_norm_sq().sqrt());
    }
    let kmax = cfg.max_k_component().max(1) as usize;
    let n = (8 * kmax).max(32);
    let h = 2.0 * PI / n as f64;
    let mut acc = 0.0;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let x = [i0 as f64 * h, i1 as f64 * h, i2 as f64 * h];
                let s2: f64 = cfg
                    .entries
                    .iter()
                    .map(|e| {
                        let ph = e.k[0] as f64 * x[0] + e.k[1] as f64 * x[1] + e.k[2] as f64 * x[2];
                        let v = if e.parity == 0 { ph.cos() } else { ph.sin() };
                        (e.alpha * v).powi(2)
                    })
                    .sum();
                acc += s2.powf(p / 2.0);
            }
        }
    }
    Ok((acc * h * h * h).powf(1.0 / p))
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn entry_key(seed: u64, k: Wavevector, parity: u8) -> [u8; 32] {
    let mut h = mix64(seed);
    for c in k {
        h = mix64(h ^ (c as i64 as u64));
    }
    h = mix64(h ^ parity as u64);
    let mut key = [0u8; 32];
    let mut w = h;
    for chunk in key.chunks_mut(8) {
        w = mix64(w);
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    key
}

struct ResolvedEntry {
    idx: usize,
    mirror: usize,
    parity: u8,
    alpha: f64,
    key: [u8; 32],
}

/// Draws forcing increments on a given grid.
pub struct NoiseSampler {
    grid: Arc<Grid>,
    cfg: NoiseConfig,
    entries: Vec<ResolvedEntry>,
}

impl NoiseSampler {
    pub fn new(grid: &Arc<Grid>, cfg: &NoiseConfig) -> Result<Self> {
        let mut entries = Vec::with_capacity(cfg.entries.len());
        for e in &cfg.entries {
            let idx = grid
                .index_of(e.k)
                .filter(|&i| grid.mask()[i])
                .ok_or_else(|| Error::InvalidArgument(format!("forcing mode {:?} is not retained on an n={} grid", e.k, grid.n())))?;
            entries.push(ResolvedEntry { idx, mirror: grid.mirror(idx), parity: e.parity, alpha: e.alpha, key: entry_key(cfg.seed, e.k, e.parity) });
        }
        Ok(NoiseSampler { grid: grid.clone(), cfg: cfg.clone(), entries })
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Standard normal draws `ξ_{k,m}` for one step, in entry order.
    pub fn normals(&self, step: u64, traj: u64) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| {
                let mut rng = ChaCha8Rng::from_seed(e.key);
                rng.set_stream(traj);
                rng.set_word_pos((step as u128) << 8);
                StandardNormal.sample(&mut rng)
            })
            .collect()
    }

    /// Field `Σ α σ_k^m ξ_{k,m}` for given weights.
    pub fn field_from_weights(&self, weights: &[f64]) -> SpectralScalar {
        let mut f = SpectralScalar::zeros(&self.grid);
        let c = f.coeffs_mut();
        for (e, &w) in self.entries.iter().zip(weights) {
            let half = 0.5 * e.alpha * w;
            let z = if e.parity == 0 { Complex64::new(half, 0.0) } else { Complex64::new(0.0, -half) };
            c[e.idx] += z;
            c[e.mirror] += z.conj();
        }
        f
    }

    /// Increment `σ ΔW` over a step of length `dt`.
    pub fn sample_increment(&self, dt: f64, step: u64, traj: u64) -> Result<SpectralScalar> {
        if !(dt > 0.0) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        let s = dt.sqrt();
        let w: Vec<f64> = self.normals(step, traj).into_iter().map(|x| x * s).collect();
        Ok(self.field_from_weights(&w))
    }

    /// `Σ α² ⟨σ_k^m, θ⟩²`, the quadratic-variation density of `⟨σ dW, θ⟩`.
    pub fn quadratic_density(&self, theta: &SpectralScalar) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let c = theta.coeffs()[e.idx];
                let coord = if e.parity == 0 { c.re } else { -c.im };
                let pairing = VOLUME * coord;
                (e.alpha * pairing).powi(2)
            })
            .sum()
    }

    /// `‖σ‖_{L^p}` evaluated on this sampler's grid with `tr`.
    pub fn sigma_norm_on_grid(&self, p: f64, tr: &mut Transform) -> Result<f64> {
        let mut total = vec![0.0; self.grid.len()];
        for (i, _) in self.entries.iter().enumerate() {
            let mut w = vec![0.0; self.entries.len()];
            w[i] = 1.0;
            let v = tr.inverse(&self.field_from_weights(&w));
            for (t, x) in total.iter_mut().zip(v) {
                *t += x * x;
            }
        }
        let mag: Vec<f64> = total.into_iter().map(f64::sqrt).collect();
        Ok(crate::spectral::ops::lp_of_values(&mag, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_lp_norm() {
        // |a cos|² + |a sin|² = a², so the L^p norm is (2π)^{3/p} a.
        let a = 0.8;
        let cfg = NoiseConfig::new(
            vec![NoiseEntry { k: [1, 0, 0], parity: 0, alpha: a }, NoiseEntry { k: [1, 0, 0], parity: 1, alpha: a }],
            0,
        )
        .unwrap();
        for p in [1.0, 2.0, 3.0, 6.0] {
            let expected = (2.0 * PI).powf(3.0 / p) * a;
            assert!((sigma_norm(&cfg, p).unwrap() - expected).abs() < 1e-10 * expected, "p={p}");
        }
    }

    #[test]
    fn hs_norm_matches_quadrature() {
        let cfg = NoiseConfig::new(
            vec![NoiseEntry { k: [1, 2, 0], parity: 1, alpha: 0.3 }, NoiseEntry { k: [0, 1, -1], parity: 0, alpha: 1.1 }],
            0,
        )
        .unwrap();
        let g = Grid::new(8).unwrap();
        let mut tr = Transform::new(&g);
        let s = NoiseSampler::new(&g, &cfg).unwrap();
        let quad = s.sigma_norm_on_grid(2.0, &mut tr).unwrap();
        assert!((quad - sigma_norm(&cfg, 2.0).unwrap()).abs() < 1e-12 * quad);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(NoiseConfig::new(vec![NoiseEntry { k: [0, 0, 0], parity: 0, alpha: 1.0 }], 0).is_err());
        assert!(NoiseConfig::new(vec![NoiseEntry { k: [-1, 0, 0], parity: 0, alpha: 1.0 }], 0).is_err());
        assert!(NoiseConfig::new(vec![NoiseEntry { k: [1, 0, 0], parity: 2, alpha: 1.0 }], 0).is_err());
        let g = Grid::new(8).unwrap();
        let cfg = NoiseConfig::new(vec![NoiseEntry { k: [3, 0, 0], parity: 0, alpha: 1.0 }], 0).unwrap();
        assert!(NoiseSampler::new(&g, &cfg).is_err());
    }

    #[test]
    fn increments_are_reproducible_and_distinct() {
        let g = Grid::new(8).unwrap();
        let s = NoiseSampler::new(&g, &NoiseConfig::unit_axes(1.0, 42)).unwrap();
        let a = s.normals(10, 3);
        assert_eq!(a, s.normals(10, 3));
        assert_ne!(a, s.normals(11, 3));
        assert_ne!(a, s.normals(10, 4));
        let other = NoiseSampler::new(&g, &NoiseConfig::unit_axes(1.0, 43)).unwrap();
        assert_ne!(a, other.normals(10, 3));
        let inc = s.sample_increment(1e-3, 10, 3).unwrap();
        assert!(inc.hermitian_defect() == 0.0);
        let coord = inc.mode_coordinate([0, 1, 0], 1);
        assert!((coord - a[3] * 1e-3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normals_have_unit_variance() {
        let g = Grid::new(8).unwrap();
        let s = NoiseSampler::new(&g, &NoiseConfig::unit_axes(1.0, 7)).unwrap();
        let n = 20_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for step in 0..n {
            let x = s.normals(step, 0)[0];
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }
}
