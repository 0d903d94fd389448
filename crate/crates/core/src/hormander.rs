//! Lie-bracket calculus for the forced limit equation.
//!
//! With drift `F(θ) = −κΔθ + M_u(θ)·∇θ` and constant forcing directions
//! `σ_k^0 = cos(k·x)`, `σ_k^1 = sin(k·x)`, the second bracket is the bilinear form
//! `[[F, σ_k^m], σ_j^{m'}] = M_u(σ_k^m)·∇σ_j^{m'} + M_u(σ_j^{m'})·∇σ_k^m`, which lives
//! on the frequencies `k ± j`. When both parities of `k` and `j` are available the
//! four brackets span both parities at `k + j` and `k − j` exactly when
//! `|M_u(k)·j| ≠ |M_u(j)·k|`. Iterating from the forced modes gives nested spaces
//! `W₀ ⊆ W₁ ⊆ …` whose union must contain every low mode.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::canonical_k;
use crate::spectral::grid::{dot_k, norm_sq, Wavevector};
use crate::spectral::{symbol_d, symbol_mu, Grid, PhysParams, SpectralScalar, SymbolTable, Transform};

/// Default relative tolerance below which a condition is treated as degenerate.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A real Fourier mode `σ_k^m` with canonical `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub k: Wavevector,
    pub parity: u8,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})^{}", self.k[0], self.k[1], self.k[2], self.parity)
    }
}

/// Canonical form of `σ_k^m` and the sign relating them: `σ_{-k}^1 = −σ_k^1`.
pub fn canonicalize(k: Wavevector, parity: u8) -> (Direction, f64) {
    let (ck, flipped) = canonical_k(k);
    let sign = if flipped && parity % 2 == 1 { -1.0 } else { 1.0 };
    (Direction { k: ck, parity: parity % 2 }, sign)
}

fn add(k: Wavevector, j: Wavevector) -> Wavevector {
    [k[0] + j[0], k[1] + j[1], k[2] + j[2]]
}

fn sub(k: Wavevector, j: Wavevector) -> Wavevector {
    [k[0] - j[0], k[1] - j[1], k[2] - j[2]]
}

fn check_nonzero(k: Wavevector, name: &str) -> Result<()> {
    if k == [0, 0, 0] {
        return invalid(format!("{name} must be a nonzero wavevector"));
    }
    Ok(())
}

fn sign_pow(e: u32) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Expansion of `[[F, σ_k^m], σ_j^{m'}]` in canonical modes; zero frequencies are dropped.
pub fn bracket_pair(k: Wavevector, m: u8, j: Wavevector, m2: u8, p: &PhysParams) -> Result<Vec<(Direction, f64)>> {
    check_nonzero(k, "k")?;
    check_nonzero(j, "j")?;
    let a = dot_k(symbol_mu(k, p)?, j);
    let b = dot_k(symbol_mu(j, p)?, k);
    let (m, m2) = (m as u32 % 2, m2 as u32 % 2);
    let parity = ((m + m2 + 1) % 2) as u8;
    let mut out = Vec::with_capacity(2);
    let plus = 0.5 * sign_pow((m + 1) * (m2 + 1)) * (a + b);
    let minus = 0.5 * sign_pow(m * (m2 + 1)) * (a - b);
    for (freq, coeff) in [(add(k, j), plus), (sub(k, j), minus)] {
        if freq == [0, 0, 0] {
            continue;
        }
        let (d, s) = canonicalize(freq, parity);
        out.push((d, s * coeff));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NearDegenerate,
}

/// Evaluation of `|M_u(k)·j| ≠ |M_u(j)·k|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEval {
    pub lhs: f64,
    pub rhs: f64,
    /// `||lhs| − |rhs|| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub margin: f64,
    pub verdict: Verdict,
}

/// Closed-form condition values for `j = e₁, e₂, e₃`, both sides multiplied by `D(k)`.
fn specialized(k: Wavevector, axis: usize, p: &PhysParams) -> Result<(f64, f64)> {
    let d = symbol_d(k, p)?;
    let (k1, k2, k3) = (k[0] as f64, k[1] as f64, k[2] as f64);
    let q = norm_sq(k);
    let om = p.omega();
    let ok = dot_k(om, k);
    let bk = dot_k(p.b0, k);
    let g = bk * bk + p.nu * q * q;
    Ok(match axis {
        0 => {
            let c = p.nu + p.b0[0] * p.b0[0];
            ((k2 * ok * q + k1 * k3 * g).abs(), k3.abs() * d / c)
        }
        1 => {
            let c = p.nu + p.b0[1] * p.b0[1];
            ((-k1 * ok * q + k2 * k3 * g).abs(), d / (c * c + om[1] * om[1]) * (c * k3 - om[1] * k1).abs())
        }
        _ => ((k1 * k1 + k2 * k2) * g, 0.0),
    })
}

/// Decides whether brackets of `k` against `j` produce both parities at `k ± j`.
///
/// For `j` on a coordinate axis the closed forms are evaluated as well and must
/// agree with the generic values; a mismatch is an internal-consistency error.
pub fn new_direction_condition(k: Wavevector, j: Wavevector, p: &PhysParams, tol: f64) -> Result<ConditionEval> {
    check_nonzero(k, "k")?;
    check_nonzero(j, "j")?;
    if !(tol >= 0.0) {
        return invalid(format!("tolerance must be non-negative, got {tol}"));
    }
    let mk = symbol_mu(k, p)?;
    let mj = symbol_mu(j, p)?;
    let lhs = dot_k(mk, j);
    let rhs = dot_k(mj, k);
    let (al, ar) = (lhs.abs(), rhs.abs());
    let big = al.max(ar);
    let nk: f64 = mk.iter().map(|c| c * c).sum::<f64>().sqrt() * norm_sq(j).sqrt();
    let nj: f64 = mj.iter().map(|c| c * c).sum::<f64>().sqrt() * norm_sq(k).sqrt();
    let scale = nk + nj;
    let (margin, verdict) = if big <= 1e-14 * scale || big == 0.0 {
        (0.0, Verdict::Fails)
    } else {
        let m = (al - ar).abs() / big;
        (m, if m < tol { Verdict::NearDegenerate } else { Verdict::Holds })
    };
    let axis = match j {
        [1, 0, 0] | [-1, 0, 0] => Some(0),
        [0, 1, 0] | [0, -1, 0] => Some(1),
        [0, 0, 1] | [0, 0, -1] => Some(2),
        _ => None,
    };
    if let Some(axis) = axis {
        let d = symbol_d(k, p)?;
        let (sl, sr) = specialized(k, axis, p)?;
        let (sl, sr) = (sl / d, sr / d);
        let agree = |x: f64, y: f64| (x - y).abs() <= 1e-9 * scale.max(1e-300);
        if !agree(sl, al) || !agree(sr, ar) {
            return Err(Error::InternalConsistency(format!(
                "closed-form condition for k = {k:?}, j = {j:?} gives ({sl:e}, {sr:e}) but the generic form gives ({al:e}, {ar:e})"
            )));
        }
    }
    Ok(ConditionEval { lhs, rhs, margin, verdict })
}

/// One admitted bracket step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateStep {
    pub generation: usize,
    pub parent: Wavevector,
    pub seed: Wavevector,
    pub condition: ConditionEval,
    /// Canonical `k + j` and `k − j` (nonzero ones), each admitted with both parities.
    pub produced: Vec<Wavevector>,
}

/// A condition evaluation that was refused because it fell inside the tolerance band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearDegenerate {
    pub parent: Wavevector,
    pub seed: Wavevector,
    pub condition: ConditionEval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    pub n: usize,
    pub covered: bool,
    /// Generation at which every `σ_k^m` with `|k| <= N` is present.
    pub n_of_n: Option<usize>,
    pub certificate: Vec<CertificateStep>,
    pub near_degenerate: Vec<NearDegenerate>,
    /// Uncovered target directions when `covered` is false.
    pub missing: Vec<Direction>,
    /// Number of directions known at termination.
    pub directions: usize,
    /// Height of the working plane used by [`constructive_path`].
    pub k_plane: Option<i32>,
    pub failure: Option<String>,
}

/// Canonical wavevectors with `0 < |k| <= N`.
pub fn target_frequencies(n: usize) -> Vec<Wavevector> {
    let r = n as i32;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let k = [a, b, c];
                if k != [0, 0, 0] && !canonical_k(k).1 && norm_sq(k) <= (n * n) as f64 {
                    out.push(k);
                }
            }
        }
    }
    out
}

fn parities(set: &BTreeMap<Wavevector, u8>, k: Wavevector) -> u8 {
    set.get(&k).copied().unwrap_or(0)
}

fn missing_targets(known: &BTreeMap<Wavevector, u8>, n: usize) -> Vec<Direction> {
    let mut out = Vec::new();
    for k in target_frequencies(n) {
        let bits = parities(known, k);
        for parity in 0..2u8 {
            if bits & (1 << parity) == 0 {
                out.push(Direction { k, parity });
            }
        }
    }
    out
}

fn seed_map(seeds: &[Direction]) -> Result<BTreeMap<Wavevector, u8>> {
    let mut known = BTreeMap::new();
    for s in seeds {
        check_nonzero(s.k, "seed")?;
        if s.parity > 1 {
            return invalid(format!("seed parity must be 0 or 1, got {}", s.parity));
        }
        let (c, _) = canonicalize(s.k, s.parity);
        *known.entry(c.k).or_insert(0u8) |= 1 << c.parity;
    }
    Ok(known)
}

/// Breadth-first closure `W₀ ⊆ W₁ ⊆ …` from the seeds, stopping when every mode with
/// `|k| <= N` is present or after `n_max` generations.
///
/// Brackets are taken between seed frequencies and known frequencies only, and a
/// pair contributes when both carry both parities and the condition holds.
pub fn span_closure(seeds: &[Direction], n: usize, p: &PhysParams, tol: f64, n_max: usize) -> Result<SpanReport> {
    if seeds.is_empty() {
        return invalid("at least one seed direction is required");
    }
    if n == 0 {
        return invalid("N must be at least 1");
    }
    let p = p.validated()?;
    let mut known = seed_map(seeds)?;
    let full_seeds: Vec<Wavevector> = known.iter().filter(|(_, &b)| b == 3).map(|(k, _)| *k).collect();
    let mut frontier: BTreeSet<Wavevector> = known.iter().filter(|(_, &b)| b == 3).map(|(k, _)| *k).collect();
    let mut certificate = Vec::new();
    let mut near = Vec::new();
    let mut generation = 0;
    loop {
        let missing = missing_targets(&known, n);
        if missing.is_empty() {
            return Ok(SpanReport {
                n,
                covered: true,
                n_of_n: Some(generation),
                certificate,
                near_degenerate: near,
                missing,
                directions: known.len(),
                k_plane: None,
                failure: None,
            });
        }
        if generation >= n_max || frontier.is_empty() {
            let failure = if frontier.is_empty() {
                "no new directions can be generated".to_string()
            } else {
                format!("generation limit {n_max} reached")
            };
            return Ok(SpanReport {
                n,
                covered: false,
                n_of_n: None,
                certificate,
                near_degenerate: near,
                missing,
                directions: known.len(),
                k_plane: None,
                failure: Some(failure),
            });
        }
        generation += 1;
        let mut next = BTreeSet::new();
        for &k in &frontier {
            for &j in &full_seeds {
                let cond = new_direction_condition(k, j, &p, tol)?;
                match cond.verdict {
                    Verdict::Fails => {}
                    Verdict::NearDegenerate => near.push(NearDegenerate { parent: k, seed: j, condition: cond }),
                    Verdict::Holds => {
                        let mut produced = Vec::new();
                        let mut fresh = false;
                        for f in [add(k, j), sub(k, j)] {
                            if f == [0, 0, 0] {
                                continue;
                            }
                            let c = canonical_k(f).0;
                            produced.push(c);
                            if parities(&known, c) != 3 {
                                fresh = true;
                            }
                        }
                        if fresh {
                            for &c in &produced {
                                if parities(&known, c) != 3 {
                                    next.insert(c);
                                }
                            }
                            certificate.push(CertificateStep { generation, parent: k, seed: j, condition: cond, produced });
                        }
                    }
                }
            }
        }
        for &c in &next {
            known.insert(c, 3);
        }
        frontier = next;
    }
}

/// Checks a certificate against fresh condition evaluations and confirms that it
/// reaches every mode with `|k| <= N` from the seeds.
pub fn replay_certificate(seeds: &[Direction], report: &SpanReport, p: &PhysParams, tol: f64) -> Result<bool> {
    let p = p.validated()?;
    let mut known = seed_map(seeds)?;
    let seed_full: BTreeSet<Wavevector> = known.iter().filter(|(_, &b)| b == 3).map(|(k, _)| *k).collect();
    for step in &report.certificate {
        if parities(&known, step.parent) != 3 || !seed_full.contains(&step.seed) {
            return Ok(false);
        }
        let cond = new_direction_condition(step.parent, step.seed, &p, tol)?;
        if cond.verdict != Verdict::Holds || cond.verdict != step.condition.verdict {
            return Ok(false);
        }
        let mut expect: Vec<Wavevector> = [add(step.parent, step.seed), sub(step.parent, step.seed)]
            .into_iter()
            .filter(|f| *f != [0, 0, 0])
            .map(|f| canonical_k(f).0)
            .collect();
        let mut got = step.produced.clone();
        expect.sort();
        got.sort();
        if expect != got {
            return Ok(false);
        }
        for c in got {
            known.insert(c, 3);
        }
    }
    Ok(!report.covered || missing_targets(&known, report.n).is_empty())
}

/// Largest height searched for the working plane.
pub const K_PLANE_CAP: i32 = 10_000;

/// The explicit covering route: climb to a plane `k₃ = K` where brackets with `e₁` and
/// `e₂` never degenerate, fill that plane, descend with `e₃`, then recover the
/// vertical axis from `(±1, 0, l)`.
pub fn constructive_path(n: usize, p: &PhysParams, tol: f64) -> Result<SpanReport> {
    if n == 0 {
        return invalid("N must be at least 1");
    }
    let p = p.validated()?;
    let r = n as i32;
    let (e1, e2, e3) = ([1, 0, 0], [0, 1, 0], [0, 0, 1]);
    let seeds: Vec<Direction> =
        [e1, e2, e3].iter().flat_map(|&k| (0..2).map(move |parity| Direction { k, parity })).collect();
    let mut known = seed_map(&seeds)?;
    let mut certificate = Vec::new();
    let mut near = Vec::new();
    let mut depth: BTreeMap<Wavevector, usize> = [e1, e2, e3].iter().map(|&k| (k, 0)).collect();

    let fail = |msg: String, certificate: Vec<CertificateStep>, near: Vec<NearDegenerate>, known: &BTreeMap<Wavevector, u8>, k_plane| {
        Ok(SpanReport {
            n,
            covered: false,
            n_of_n: None,
            certificate,
            near_degenerate: near,
            missing: missing_targets(known, n),
            directions: known.len(),
            k_plane,
            failure: Some(msg),
        })
    };

    // Smallest K with both planar conditions holding on the whole square.
    let mut k_plane = None;
    let mut first_violation = String::new();
    'search: for kk in 1..=K_PLANE_CAP {
        for a in -r..=r {
            for b in -r..=r {
                let k = [a, b, kk];
                for j in [e1, e2] {
                    let c = new_direction_condition(k, j, &p, tol)?;
                    if c.verdict != Verdict::Holds {
                        if first_violation.is_empty() {
                            first_violation = format!("condition with j = {j:?} fails at k = {k:?} (margin {:.3e})", c.margin);
                        }
                        continue 'search;
                    }
                }
            }
        }
        k_plane = Some(kk);
        break;
    }
    let Some(kp) = k_plane else {
        return fail(format!("no working plane below K = {K_PLANE_CAP}: {first_violation}"), certificate, near, &known, None);
    };

    let mut apply = |parent: Wavevector, j: Wavevector, target: Wavevector| -> Result<std::result::Result<(), String>> {
        let pc = canonical_k(parent).0;
        if parities(&known, pc) != 3 {
            return Ok(Err(format!("parent {parent:?} is not yet available")));
        }
        let cond = new_direction_condition(parent, j, &p, tol)?;
        if cond.verdict != Verdict::Holds {
            if cond.verdict == Verdict::NearDegenerate {
                near.push(NearDegenerate { parent: pc, seed: j, condition: cond });
            }
            return Ok(Err(format!("condition with j = {j:?} does not hold at k = {parent:?} ({:?})", cond.verdict)));
        }
        let produced: Vec<Wavevector> =
            [add(pc, j), sub(pc, j)].into_iter().filter(|f| *f != [0, 0, 0]).map(|f| canonical_k(f).0).collect();
        debug_assert!(produced.contains(&canonical_k(target).0));
        let g = depth[&pc] + 1;
        for &c in &produced {
            known.insert(c, 3);
            depth.entry(c).or_insert(g);
        }
        certificate.push(CertificateStep { generation: g, parent: pc, seed: j, condition: cond, produced });
        Ok(Ok(()))
    };

    // Climb (1,0,0) -> (1,0,K).
    for l in 0..kp {
        if let Err(msg) = apply([1, 0, l], e3, [1, 0, l + 1])? {
            return fail(msg, certificate, near, &known, Some(kp));
        }
    }
    // Fill the plane along e₁, then along e₂ from every point of that line.
    for a in 1..r {
        if let Err(msg) = apply([a, 0, kp], e1, [a + 1, 0, kp])? {
            return fail(msg, certificate, near, &known, Some(kp));
        }
    }
    for a in (-r + 1..=1).rev() {
        if let Err(msg) = apply([a, 0, kp], e1, [a - 1, 0, kp])? {
            return fail(msg, certificate, near, &known, Some(kp));
        }
    }
    for a in -r..=r {
        for b in 0..r {
            if let Err(msg) = apply([a, b, kp], e2, [a, b + 1, kp])? {
                return fail(msg, certificate, near, &known, Some(kp));
            }
        }
        for b in (-r + 1..=0).rev() {
            if let Err(msg) = apply([a, b, kp], e2, [a, b - 1, kp])? {
                return fail(msg, certificate, near, &known, Some(kp));
            }
        }
    }
    // Move every off-axis column of the square to all heights |k₃| <= max(N, K).
    for a in -r..=r {
        for b in -r..=r {
            if a == 0 && b == 0 {
                continue;
            }
            for l in ((-r + 1)..=kp).rev() {
                if let Err(msg) = apply([a, b, l], e3, [a, b, l - 1])? {
                    return fail(msg, certificate, near, &known, Some(kp));
                }
            }
        }
    }
    // Recover (0,0,l) from (s,0,l) with s chosen so that s·B₀₁ has the sign of l·B₀₃.
    for l in 1..=r {
        let s = if p.b0[0] == 0.0 || p.b0[2] == 0.0 { 1 } else { (l as f64 * p.b0[2]).signum() as i32 * p.b0[0].signum() as i32 };
        if let Err(msg) = apply([s, 0, l], e1, [0, 0, l])? {
            return fail(msg, certificate, near, &known, Some(kp));
        }
    }
    let missing = missing_targets(&known, n);
    let covered = missing.is_empty();
    let n_of_n = if covered {
        target_frequencies(n).iter().map(|k| depth.get(k).copied().unwrap_or(0)).max()
    } else {
        None
    };
    Ok(SpanReport {
        n,
        covered,
        n_of_n,
        certificate,
        near_degenerate: near,
        failure: if covered { None } else { Some("route finished without covering every target".into()) },
        missing,
        directions: known.len(),
        k_plane: Some(kp),
    })
}

/// Finite-difference evaluation of `[[F, σ_k^m], σ_j^{m'}]` on an `n³` grid.
///
/// The drift is evaluated without dealiasing, so the result is exact for modes
/// below the Nyquist frequency; nested central differences are exact for the
/// quadratic drift up to rounding.
pub struct NumericBracket {
    grid: std::sync::Arc<Grid>,
    symbols: SymbolTable,
    kappa: f64,
    tr: Transform,
}

impl NumericBracket {
    pub fn new(n: usize, p: &PhysParams) -> Result<Self> {
        let grid = Grid::new(n)?;
        let p = p.validated()?;
        Ok(NumericBracket { symbols: SymbolTable::new(&grid, &p)?, tr: Transform::new(&grid), grid, kappa: p.kappa })
    }

    fn mode(&self, k: Wavevector, parity: u8) -> Result<SpectralScalar> {
        // Built directly so that the drift sees the mode regardless of the dealiasing mask.
        let idx = self.grid.index_of(k).ok_or_else(|| Error::InvalidArgument(format!("mode {k:?} does not fit the grid")))?;
        let mut f = SpectralScalar::zeros(&self.grid);
        let c = if parity == 0 { num_complex::Complex64::new(0.5, 0.0) } else { num_complex::Complex64::new(0.0, -0.5) };
        f.coeffs_mut()[idx] += c;
        f.coeffs_mut()[self.grid.mirror(idx)] += c.conj();
        Ok(f)
    }

    fn drift(&mut self, theta: &SpectralScalar) -> Vec<f64> {
        let u = self.symbols.velocity(theta);
        let g = theta.gradient();
        let v = self.tr.inverse_many(&[&u.comps[0], &u.comps[1], &u.comps[2], &g.comps[0], &g.comps[1], &g.comps[2]]);
        let lap = self.tr.inverse(&theta.laplacian());
        (0..self.grid.len()).map(|i| -self.kappa * lap[i] + v[0][i] * v[3][i] + v[1][i] * v[4][i] + v[2][i] * v[5][i]).collect()
    }

    /// Grid values of the double bracket, evaluated at a base point `theta`.
    pub fn evaluate(&mut self, k: Wavevector, m: u8, j: Wavevector, m2: u8, theta: &SpectralScalar, h: f64) -> Result<Vec<f64>> {
        let sk = self.mode(k, m)?;
        let sj = self.mode(j, m2)?;
        // G(θ) = [F, σ_k](θ) = −DF(θ)σ_k; the bracket with σ_j is −DG(θ)σ_j.
        let g = |base: &SpectralScalar, this: &mut Self| -> Vec<f64> {
            let mut a = base.clone();
            a.axpy(h, &sk);
            let mut b = base.clone();
            b.axpy(-h, &sk);
            let fa = this.drift(&a);
            let fb = this.drift(&b);
            fa.iter().zip(&fb).map(|(x, y)| -(x - y) / (2.0 * h)).collect()
        };
        let mut a = theta.clone();
        a.axpy(h, &sj);
        let mut b = theta.clone();
        b.axpy(-h, &sj);
        let ga = g(&a, self);
        let gb = g(&b, self);
        Ok(ga.iter().zip(&gb).map(|(x, y)| -(x - y) / (2.0 * h)).collect())
    }

    /// Expansion coefficients of grid values in canonical modes, keyed by direction.
    pub fn project(&mut self, values: &[f64]) -> BTreeMap<Direction, f64> {
        let c: Vec<_> = values.iter().map(|&v| num_complex::Complex64::new(v, 0.0)).collect();
        let coeffs = self.tr.forward_raw(&c);
        let mut out = BTreeMap::new();
        for (idx, &k) in self.grid.wavevectors().iter().enumerate() {
            if k == [0, 0, 0] || canonical_k(k).1 {
                continue;
            }
            let z = coeffs[idx];
            for (parity, v) in [(0u8, 2.0 * z.re), (1u8, -2.0 * z.im)] {
                if v != 0.0 {
                    out.insert(Direction { k, parity }, v);
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &std::sync::Arc<Grid> {
        &self.grid
    }
}
