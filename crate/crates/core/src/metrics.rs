//! Distances on temperature fields and extended phase space, and Wasserstein
//! brackets between empirical measures.
//!
//! The weighted distance `ρ(a, b) = inf_γ ∫ e^{η‖γ‖²} ‖γ'‖` over paths from `a` to `b`
//! is bracketed rather than computed: `‖a − b‖` from below, the straight-path
//! integral and the cruder `e^{2η(‖a‖² + ‖b‖²)}‖a − b‖` from above.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::FullState;
use crate::error::{invalid, Result};
use crate::noise::NoiseConfig;
use crate::spectral::grid::Wavevector;
use crate::spectral::{PhysParams, SpectralScalar, SpectralVector, SymbolTable};

/// Largest measure size accepted by the assignment solver.
pub const MAX_ASSIGNMENT: usize = 512;

/// Quadrature nodes for the straight-path integral.
const PATH_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub eta: f64,
}

impl MetricParams {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return invalid(format!("eta must be positive and finite, got {eta}"));
        }
        Ok(MetricParams { eta })
    }

    /// `min(κ²ν / (4C‖σ‖²), 0.05)` with `C = 1`.
    pub fn default_for(p: &PhysParams, noise: &NoiseConfig) -> Self {
        let s2 = noise.hs_norm_sq();
        let eta = if s2 > 0.0 { (p.kappa * p.kappa * p.nu / (4.0 * s2)).min(0.05) } else { 0.05 };
        MetricParams { eta }
    }
}

/// Lower and upper bounds on a distance; `lower <= path_upper <= upper`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub path_upper: f64,
    pub upper: f64,
}

/// Which side of a [`Bracket`] to use as a ground metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Lower,
    PathUpper,
    Upper,
}

impl Bracket {
    pub fn get(&self, kind: BoundKind) -> f64 {
        match kind {
            BoundKind::Lower => self.lower,
            BoundKind::PathUpper => self.path_upper,
            BoundKind::Upper => self.upper,
        }
    }

    fn add_exact(self, x: f64) -> Bracket {
        Bracket { lower: self.lower + x, path_upper: self.path_upper + x, upper: self.upper + x }
    }
}

/// Bracket on `ρ(a, b)` from the scalar data `‖a‖², ⟨a, b⟩, ‖b‖²`.
pub fn rho_from_gram(aa: f64, ab: f64, bb: f64, eta: f64) -> Bracket {
    let d2 = (aa - 2.0 * ab + bb).max(0.0);
    let d = d2.sqrt();
    // ‖a + t(b − a)‖² is the quadratic aa + 2t(ab − aa) + t² d², convex in t,
    // so the trapezoidal sum overestimates the straight-path integral.
    let q = |t: f64| aa + 2.0 * t * (ab - aa) + t * t * d2;
    let h = 1.0 / PATH_NODES as f64;
    let mut s = 0.5 * ((eta * q(0.0)).exp() + (eta * q(1.0)).exp());
    for i in 1..PATH_NODES {
        s += (eta * q(i as f64 * h)).exp();
    }
    let path = (s * h * d).max(d);
    let upper = (2.0 * eta * (aa + bb)).exp() * d;
    Bracket { lower: d, path_upper: path.min(upper), upper }
}

pub fn rho_bounds(a: &SpectralScalar, b: &SpectralScalar, m: &MetricParams) -> Result<Bracket> {
    if !a.same_grid(b) {
        return invalid("fields live on different grids");
    }
    Ok(rho_from_gram(a.l2_sq(), a.dot(b), b.l2_sq(), m.eta))
}

/// `(θ, M_u θ, M_b θ)` as a point of the extended phase space.
pub fn lift(theta: &SpectralScalar, p: &PhysParams) -> Result<FullState> {
    let sym = SymbolTable::new(theta.grid(), p)?;
    Ok(FullState { u: sym.velocity(theta), b: sym.magnetic(theta), theta: theta.clone(), time: 0.0 })
}

pub fn project(x: &FullState) -> SpectralScalar {
    x.theta.clone()
}

fn h1_dist(a: &SpectralVector, b: &SpectralVector) -> f64 {
    a.sub(b).h1_sq().sqrt()
}

/// `ρ̃(x, y) = ‖U − U'‖_{H¹} + ‖B − B'‖_{H¹} + ρ(Θ, Θ')`.
pub fn rho_tilde(x: &FullState, y: &FullState, m: &MetricParams) -> Result<Bracket> {
    Ok(rho_bounds(&x.theta, &y.theta, m)?.add_exact(h1_dist(&x.u, &y.u) + h1_dist(&x.b, &y.b)))
}

/// `ρ*(θ, ψ) = ρ̃(Lθ, Lψ)`.
pub fn rho_star(theta: &SpectralScalar, psi: &SpectralScalar, p: &PhysParams, m: &MetricParams) -> Result<Bracket> {
    rho_tilde(&lift(theta, p)?, &lift(psi, p)?, m)
}

/// Constant `C` with `ρ ≤ ρ* ≤ C ρ` on a grid: `1 + sup |k||M_u(k)| + sup |k||M_b(k)|`.
pub fn lift_constant(table: &SymbolTable) -> f64 {
    let g = &table.grid;
    let mut cu: f64 = 0.0;
    let mut cb: f64 = 0.0;
    for &i in g.active() {
        let m = table.mu[i].iter().map(|c| c * c).sum::<f64>().sqrt() * g.k2()[i].sqrt();
        cu = cu.max(m);
        cb = cb.max(m * table.mb[i].abs());
    }
    1.0 + cu + cb
}

/// Exact minimum-cost perfect matching on a square cost matrix (shortest augmenting paths).
///
/// Returns the optimal total and `assign[i]`, the column matched to row `i`.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Result<(f64, Vec<usize>)> {
    let n = cost.len();
    if n > MAX_ASSIGNMENT {
        return invalid(format!("assignment size {n} exceeds the cap of {MAX_ASSIGNMENT}"));
    }
    if cost.iter().any(|r| r.len() != n) {
        return invalid("cost matrix must be square");
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return invalid("cost matrix has non-finite entries");
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    // Potentials u (rows), v (columns); p[j] is the row matched to column j, 1-based with 0 as sentinel.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assign[i]]).sum();
    Ok((total, assign))
}

/// Equal-weight empirical measure.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure<T> {
    pub samples: Vec<T>,
}

impl<T> EmpiricalMeasure<T> {
    pub fn new(samples: Vec<T>) -> Self {
        EmpiricalMeasure { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Bracket on the Wasserstein distance plus the optimal pairing for the upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WassersteinBracket {
    pub lower: f64,
    pub path_upper: f64,
    pub upper: f64,
    pub n: usize,
    pub upper_assignment: Vec<usize>,
}

/// Wasserstein-1 bracket for a pairwise distance bracket `cost`.
///
/// Each bound is its own optimal transport problem; since the pairwise bounds are
/// ordered, so are the optimal values.
pub fn wasserstein<T, F>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, cost: F) -> Result<WassersteinBracket>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<Bracket> + Sync,
{
    let n = mu.len();
    if n != nu.len() {
        return invalid(format!("measures must have equal sizes, got {n} and {}", nu.len()));
    }
    if n == 0 {
        return invalid("measures must be nonempty");
    }
    if n > MAX_ASSIGNMENT {
        return invalid(format!("measure size {n} exceeds the cap of {MAX_ASSIGNMENT}"));
    }
    let table: Vec<Vec<Bracket>> = mu
        .samples
        .par_iter()
        .map(|a| nu.samples.iter().map(|b| cost(a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let pick = |f: fn(&Bracket) -> f64| -> Vec<Vec<f64>> { table.iter().map(|r| r.iter().map(f).collect()).collect() };
    let (lo, _) = solve_assignment(&pick(|b| b.lower))?;
    let (pu, _) = solve_assignment(&pick(|b| b.path_upper))?;
    let (up, assign) = solve_assignment(&pick(|b| b.upper))?;
    let k = n as f64;
    Ok(WassersteinBracket { lower: lo / k, path_upper: pu / k, upper: up / k, n, upper_assignment: assign })
}

/// Test observable on the extended phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoordinateObservable {
    /// `⟨θ, σ_k^m⟩`.
    Temperature { k: Wavevector, parity: u8 },
    /// `⟨u, e_i σ_k^m⟩`.
    Velocity { k: Wavevector, parity: u8, component: usize },
}

impl CoordinateObservable {
    fn l2_pair(f: &SpectralScalar, k: Wavevector, parity: u8) -> f64 {
        crate::spectral::field::VOLUME * 0.5 * f.mode_coordinate(k, parity)
    }

    pub fn evaluate(&self, x: &FullState) -> f64 {
        match *self {
            CoordinateObservable::Temperature { k, parity } => Self::l2_pair(&x.theta, k, parity),
            CoordinateObservable::Velocity { k, parity, component } => Self::l2_pair(&x.u.comps[component], k, parity),
        }
    }

    /// Bound on the weighted gradient seminorm `sup e^{−η‖x‖}‖∇φ(x)‖`.
    ///
    /// Both observables are linear with gradient norm `‖σ_k^m‖ = (2π)^{3/2}/√2`; for the
    /// velocity one the `H¹` dual norm is no larger since `|k| >= 1` on mean-zero fields.
    pub fn seminorm(&self) -> f64 {
        (crate::spectral::field::VOLUME / 2.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn rho_bracket_is_ordered() {
        let g = Grid::new(8).unwrap();
        let a = SpectralScalar::single_mode(&g, [1, 0, 0], 0, 0.3).unwrap();
        let b = SpectralScalar::single_mode(&g, [0, 1, 1], 1, -0.2).unwrap();
        let m = MetricParams::new(0.01).unwrap();
        let r = rho_bounds(&a, &b, &m).unwrap();
        assert!((r.lower - a.sub(&b).l2()).abs() < 1e-12);
        assert!(r.lower <= r.path_upper && r.path_upper <= r.upper);
        let z = rho_bounds(&a, &a, &m).unwrap();
        assert_eq!(z.upper, 0.0);
    }

    #[test]
    fn straight_path_integral_for_collinear_points() {
        // a = 0, b = s e with ‖e‖ = 1: ∫₀¹ e^{η t² s²} s dt.
        let eta = 0.2;
        let s: f64 = 1.5;
        let r = rho_from_gram(0.0, 0.0, s * s, eta);
        let n = 100_000;
        let exact: f64 = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powi(2)).map(|t| (eta * t * s * s).exp() * s).sum::<f64>() / n as f64;
        assert!(r.path_upper >= exact);
        assert!((r.path_upper - exact) / exact < 1e-3);
    }

    #[test]
    fn assignment_small_cases() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let (t, a) = solve_assignment(&c).unwrap();
        assert_eq!(t, 5.0);
        assert_eq!(a, vec![1, 0, 2]);
        assert!(solve_assignment(&[vec![1.0, 2.0]]).is_err());
        assert_eq!(solve_assignment(&[]).unwrap().0, 0.0);
    }

    #[test]
    fn assignment_rejects_oversize() {
        let c = vec![vec![0.0; MAX_ASSIGNMENT + 1]; MAX_ASSIGNMENT + 1];
        assert!(solve_assignment(&c).is_err());
    }

    #[test]
    fn lift_then_project_is_identity() {
        let g = Grid::new(8).unwrap();
        let p = PhysParams::default();
        let t = SpectralScalar::single_mode(&g, [1, 1, 0], 0, 1.0).unwrap();
        let x = lift(&t, &p).unwrap();
        assert!(project(&x).sub(&t).max_abs() == 0.0);
        let m = MetricParams::new(0.01).unwrap();
        let s = rho_star(&t, &t.scaled(0.5), &p, &m).unwrap();
        let r = rho_bounds(&t, &t.scaled(0.5), &m).unwrap();
        let c = lift_constant(&SymbolTable::new(&g, &p).unwrap());
        assert!(r.lower <= s.lower && s.upper <= c * r.upper);
    }

    #[test]
    fn default_eta() {
        let p = PhysParams::default();
        let e = MetricParams::default_for(&p, &NoiseConfig::unit_axes(1.0, 0)).eta;
        let s2 = 6.0 * crate::spectral::field::VOLUME / 2.0;
        assert!((e - 0.1 / (4.0 * s2)).abs() < 1e-15);
        assert_eq!(MetricParams::default_for(&p, &NoiseConfig::zero(0)).eta, 0.05);
    }
}
