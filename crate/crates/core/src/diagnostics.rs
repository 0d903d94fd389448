//! Checks of the energy identities, exponential martingale tails, moment bounds
//! and the series behind the stochastic Grönwall argument.
//!
//! Constants the analysis only proves to exist are fitted on the data and
//! reported (fit-and-report), never asserted as numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EnsembleRecord, Observation, SystemKind, TrajectoryRecord};
use crate::error::{invalid, Result};
use crate::noise::{sigma_norm, NoiseConfig};
use crate::spectral::PhysParams;

/// One step of the discrete energy ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub time: f64,
    /// `ε‖U‖²/2` at the end of the step.
    pub u_energy: f64,
    /// `δ‖B‖²/2` at the end of the step.
    pub b_energy: f64,
    /// `‖Θ‖²/2` at the end of the step.
    pub theta_energy: f64,
    pub u_dissipation: f64,
    pub b_dissipation: f64,
    pub theta_dissipation: f64,
    pub injected: f64,
    pub martingale: f64,
    /// `½Δ‖Θ‖² + κ‖∇Θ‖²dt − ½‖σ‖²dt − ⟨σΔW, Θ⟩`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<EnergyRow>,
    pub max_abs: f64,
    pub mean_abs: f64,
}

/// Per-step residual of the Itô energy balance for the temperature.
///
/// Needs an observation after every step (`record_every = 1`).
pub fn energy_residual(traj: &TrajectoryRecord, params: &PhysParams, sigma_sq: f64, dt: f64) -> Result<EnergyLedger> {
    let obs = &traj.observations;
    if obs.len() < 2 {
        return invalid("trajectory has fewer than two observations");
    }
    let mut rows = Vec::with_capacity(obs.len() - 1);
    for w in obs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let h = b.time - a.time;
        if !(h > 0.0) {
            return invalid(format!("observation times not increasing at t = {}", a.time));
        }
        if (h - dt).abs() > 1e-9 * dt.max(1.0) {
            return invalid(format!("observations at t = {} are {h} apart; per-step noise increments are missing", a.time));
        }
        let d_theta = b.cum_theta_h1sq - a.cum_theta_h1sq;
        let mart = b.martingale - a.martingale;
        let injected = 0.5 * sigma_sq * dt;
        let theta_dissipation = params.kappa * d_theta;
        rows.push(EnergyRow {
            time: b.time,
            u_energy: 0.5 * params.eps * b.u_l2sq,
            b_energy: 0.5 * params.delta * b.b_l2sq,
            theta_energy: 0.5 * b.theta_l2sq,
            u_dissipation: params.nu * (b.cum_u_h1sq - a.cum_u_h1sq),
            b_dissipation: b.cum_b_h1sq - a.cum_b_h1sq,
            theta_dissipation,
            injected,
            martingale: mart,
            residual: 0.5 * (b.theta_l2sq - a.theta_l2sq) + theta_dissipation - injected - mart,
        });
    }
    let max_abs = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let mean_abs = rows.iter().map(|r| r.residual.abs()).sum::<f64>() / rows.len() as f64;
    Ok(EnergyLedger { rows, max_abs, mean_abs })
}

/// Long-time balance between dissipation and injection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationBalance {
    /// Ensemble mean of the time average of `κ‖∇θ‖²` over `[burn_in, T]`.
    pub dissipation: f64,
    /// Standard error of `dissipation` across trajectories.
    pub stderr: f64,
    /// `‖σ‖²/2`.
    pub injection: f64,
    pub rel_error: f64,
}

pub fn dissipation_balance(record: &EnsembleRecord, burn_in: f64) -> Result<DissipationBalance> {
    let kappa = record.params.kappa;
    let mut avgs = Vec::with_capacity(record.trajectories.len());
    for t in &record.trajectories {
        let obs = &t.observations;
        let start = obs.iter().find(|o| o.time >= burn_in - 1e-12);
        let (Some(s), Some(e)) = (start, obs.last()) else {
            return invalid("trajectory has no observations after the burn-in");
        };
        if e.time - s.time <= 0.0 {
            return invalid("averaging window after the burn-in is empty");
        }
        avgs.push(kappa * (e.cum_theta_h1sq - s.cum_theta_h1sq) / (e.time - s.time));
    }
    let (mean, stderr) = mean_stderr(&avgs);
    let injection = 0.5 * record.noise.hs_norm_sq();
    Ok(DissipationBalance { dissipation: mean, stderr, injection, rel_error: (mean - injection).abs() / injection })
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(sup_{t≤T} (W_t − μt) ≥ K)` for a standard Brownian motion, by reflection.
pub fn drifted_brownian_tail(mu: f64, horizon: f64, k: f64) -> f64 {
    if k <= 0.0 {
        return 1.0;
    }
    let s = horizon.sqrt();
    normal_cdf((-k - mu * horizon) / s) + (-2.0 * mu * k).exp() * normal_cdf((-k + mu * horizon) / s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub k: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub gamma: f64,
    pub n_paths: usize,
    pub rows: Vec<TailRow>,
}

impl TailTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// The first `K` at which the empirical tail exceeds `e^{−γK}` plus three standard errors.
    pub fn first_failure(&self) -> Option<f64> {
        self.rows.iter().find(|r| !r.pass).map(|r| r.k)
    }
}

/// Compares `P(S ≥ K)` with `e^{−γK}` from samples `S = sup_t (N_t − γ⟨N⟩_t/2)`.
pub fn tail_table(gamma: f64, k_grid: &[f64], sups: &[f64]) -> Result<TailTable> {
    if sups.is_empty() {
        return invalid("no sample paths");
    }
    let n = sups.len() as f64;
    let rows = k_grid
        .iter()
        .map(|&k| {
            let p = sups.iter().filter(|&&s| s >= k).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            let bound = (-gamma * k.max(0.0)).exp();
            TailRow { k, empirical: p, stderr: se, bound, pass: p <= bound + 3.0 * se }
        })
        .collect();
    Ok(TailTable { gamma, n_paths: sups.len(), rows })
}

/// Monte-Carlo tail of a Brownian martingale `N = W`, `⟨N⟩_t = t`, sampled on `n_steps` points of `[0, T]`.
pub fn brownian_tail_test(gamma: f64, k_grid: &[f64], n_paths: usize, horizon: f64, n_steps: usize, seed: u64) -> Result<TailTable> {
    if !(gamma > 0.0) || !(horizon > 0.0) || n_steps == 0 {
        return invalid("gamma and horizon must be positive and n_steps nonzero");
    }
    let dt = horizon / n_steps as f64;
    let sq = dt.sqrt();
    let sups: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path);
            let (mut w, mut sup) = (0.0f64, 0.0f64);
            for i in 1..=n_steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                w += sq * z;
                sup = sup.max(w - 0.5 * gamma * i as f64 * dt);
            }
            sup
        })
        .collect();
    tail_table(gamma, k_grid, &sups)
}

/// Largest `γ` allowed for the temperature martingale, `κ²ν/(4C‖σ‖²)`, with `C = 1`.
pub fn gamma_max(params: &PhysParams, sigma_sq: f64) -> f64 {
    if sigma_sq == 0.0 {
        return f64::INFINITY;
    }
    params.kappa * params.kappa * params.nu / (4.0 * sigma_sq)
}

/// Tail test for `N_t = (2C/κν)∫⟨σ, Θ⟩dW` along recorded trajectories, `C = 1`.
///
/// The supremum is over recorded times, so the ensemble should record every step.
pub fn martingale_tail_test(record: &EnsembleRecord, gamma: f64, k_grid: &[f64]) -> Result<TailTable> {
    let sigma_sq = record.noise.hs_norm_sq();
    let gmax = gamma_max(&record.params, sigma_sq);
    if !(gamma > 0.0) || gamma > gmax {
        return invalid(format!("gamma = {gamma} must lie in (0, {gmax}]"));
    }
    let c = 2.0 / (record.params.kappa * record.params.nu);
    let sups: Vec<f64> = record
        .trajectories
        .iter()
        .map(|t| t.observations.iter().map(|o| c * o.martingale - 0.5 * gamma * c * c * o.quad_var).fold(0.0, f64::max))
        .collect();
    tail_table(gamma, k_grid, &sups)
}

/// Inputs to the Grönwall series `Σ_{k≥1} [kT' + Ck²(ε+δ)(1+‖σ‖²t)]^γ e^{γCtk − (1−γ)ηk}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallParams {
    pub t_const: f64,
    pub c: f64,
    pub eps_plus_delta: f64,
    pub sigma_sq_t: f64,
    pub eta: f64,
    pub t: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallSeries {
    pub value: f64,
    /// Rigorous bound on the neglected tail.
    pub tail_bound: f64,
    pub terms: usize,
    /// `value / (T'^γ + (ε+δ)^γ)`, or zero when both vanish.
    pub c1: f64,
}

impl GronwallParams {
    pub fn gamma_limit(&self) -> f64 {
        self.eta / (self.eta + self.c * self.t)
    }

    pub fn term(&self, k: f64) -> f64 {
        let base = k * self.t_const + self.c * k * k * self.eps_plus_delta * (1.0 + self.sigma_sq_t);
        base.powf(self.gamma) * (self.gamma * self.c * self.t * k - (1.0 - self.gamma) * self.eta * k).exp()
    }

    /// Geometric ratio of the exponential factor.
    pub fn ratio(&self) -> f64 {
        (self.gamma * self.c * self.t - (1.0 - self.gamma) * self.eta).exp()
    }
}

const GRONWALL_MAX_TERMS: usize = 10_000_000;

pub fn gronwall_series_bound(gp: &GronwallParams) -> Result<GronwallSeries> {
    let all = [gp.t_const, gp.c, gp.eps_plus_delta, gp.sigma_sq_t, gp.eta, gp.t, gp.gamma];
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return invalid("series parameters must be finite and nonnegative");
    }
    if !(gp.eta > 0.0) || !(gp.gamma > 0.0) {
        return invalid("eta and gamma must be positive");
    }
    if gp.gamma >= gp.gamma_limit() {
        return invalid(format!("gamma = {} must be below eta/(eta + C t) = {}; the series diverges", gp.gamma, gp.gamma_limit()));
    }
    let r = gp.ratio();
    let mut sum = 0.0;
    let mut k = 0usize;
    // Consecutive terms satisfy a_{k+1}/a_k <= r (1 + 1/k)^{2γ}, a decreasing bound.
    loop {
        k += 1;
        let a = gp.term(k as f64);
        sum += a;
        let q = r * (1.0 + 1.0 / k as f64).powf(2.0 * gp.gamma);
        if q < 1.0 {
            let tail = a * q / (1.0 - q);
            if tail <= 1e-10 * sum || sum == 0.0 {
                let denom = gp.t_const.powf(gp.gamma) + gp.eps_plus_delta.powf(gp.gamma);
                let c1 = if denom > 0.0 { sum / denom } else { 0.0 };
                return Ok(GronwallSeries { value: sum, tail_bound: tail, terms: k, c1 });
            }
        }
        if k >= GRONWALL_MAX_TERMS {
            return invalid("series did not reach the requested precision");
        }
    }
}

/// One exponential moment compared against its bound's right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub name: String,
    /// Empirical `E exp(η X)`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// Empirical `E exp(η Y)`, the right-hand side without its constant.
    pub rhs: f64,
    /// Smallest constant with `lhs <= C rhs`.
    pub fitted_c: f64,
    /// Set when an exponential overflowed; the values are then meaningless.
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub eta: f64,
    pub p: f64,
    pub n_traj: usize,
    pub checks: Vec<MomentCheck>,
    /// `E exp(η(ε‖U‖² + δ‖B‖² + ‖Θ‖²_{L³}))` at the final time, for the full system with `p = 3`.
    pub uniform_functional: Option<f64>,
}

fn moment_check(name: &str, eta: f64, xs: &[f64], ys: &[f64]) -> MomentCheck {
    let ex: Vec<f64> = xs.iter().map(|x| (eta * x).exp()).collect();
    let ey: Vec<f64> = ys.iter().map(|y| (eta * y).exp()).collect();
    let (lhs, lhs_stderr) = mean_stderr(&ex);
    let (rhs, _) = mean_stderr(&ey);
    let saturated = !lhs.is_finite() || !rhs.is_finite();
    MomentCheck { name: name.to_string(), lhs, lhs_stderr, rhs, fitted_c: lhs / rhs, saturated }
}

/// Largest admissible `η`: `min(κ²ν/(4‖σ‖²), 0.05)`.
pub fn eta0(params: &PhysParams, sigma_sq: f64) -> f64 {
    gamma_max(params, sigma_sq).min(0.05)
}

/// Empirical exponential moments of an ensemble against the right-hand sides of the moment bounds.
///
/// `p` must match the `L^p` exponent the ensemble recorded. The constant inside the
/// right-hand sides is taken as one, the decay rate of the `L^p` bound as `κ`, and
/// `β = κ` in the decaying-weight functional.
pub fn moment_report(record: &EnsembleRecord, eta: f64, p: f64) -> Result<MomentReport> {
    let obs: Vec<&[Observation]> = record.trajectories.iter().map(|t| t.observations.as_slice()).collect();
    moment_report_from(record.system, &record.params, &record.noise, &obs, eta, p)
}

/// [`moment_report`] on bare observation series, e.g. read back from CSV.
pub fn moment_report_from(
    system: SystemKind,
    prm: &PhysParams,
    noise: &NoiseConfig,
    trajectories: &[&[Observation]],
    eta: f64,
    p: f64,
) -> Result<MomentReport> {
    let sigma_sq = noise.hs_norm_sq();
    let e0 = eta0(prm, sigma_sq);
    if !(eta > 0.0) || eta > e0 {
        return invalid(format!("eta = {eta} must lie in (0, {e0}]"));
    }
    if trajectories.is_empty() {
        return invalid("empty ensemble");
    }
    let sp2 = sigma_norm(noise, p)?.powi(2);
    let n = trajectories.len();
    let (mut x1, mut y1, mut x2, mut y2, mut x3, mut y3) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for obs in trajectories {
        let (Some(first), Some(last)) = (obs.first(), obs.last()) else {
            return invalid("trajectory without observations");
        };
        let time = last.time;
        let sup_lp = obs.iter().map(|o| o.theta_lp * o.theta_lp).fold(0.0, f64::max);
        let int_lp: f64 = obs.windows(2).map(|w| 0.5 * (w[0].theta_lp.powi(2) + w[1].theta_lp.powi(2)) * (w[1].time - w[0].time)).sum();
        x1.push(sup_lp + int_lp);
        y1.push(first.theta_lp.powi(2) + time * sp2);
        let sup_l2 = obs.iter().map(|o| o.theta_l2sq).fold(0.0, f64::max);
        x2.push(sup_l2 + prm.kappa * last.cum_theta_h1sq);
        y2.push(first.theta_l2sq + time * sigma_sq);
        x3.push(last.theta_lp.powi(2));
        y3.push((-prm.kappa * time).exp() * first.theta_lp.powi(2) + sp2);
    }
    let mut checks = vec![
        moment_check("lp_sup_and_integral", eta, &x1, &y1),
        moment_check("l2_sup_and_dissipation", eta, &x2, &y2),
        moment_check("lp_terminal", eta, &x3, &y3),
    ];
    let mut uniform = None;
    if system == SystemKind::Full {
        let alpha = (prm.nu / (2.0 * prm.eps)).min(1.0 / prm.delta);
        let beta = prm.kappa;
        let kn = 1.0 / (prm.kappa * prm.nu);
        let (mut x4, mut y4, mut u) = (vec![], vec![], vec![]);
        for obs in trajectories {
            let (f, l) = (obs[0], obs[obs.len() - 1]);
            let tt = l.time;
            let (ea, eb) = ((-alpha * tt).exp(), (-beta * tt).exp());
            x4.push(
                0.5 * prm.eps * l.u_l2sq
                    + 0.5 * prm.delta * l.b_l2sq
                    + kn * l.theta_l2sq
                    + ea * (0.5 * prm.nu * l.cum_u_h1sq + l.cum_b_h1sq)
                    + eb * l.cum_theta_h1sq / (2.0 * prm.nu),
            );
            y4.push(0.5 * prm.eps * ea * f.u_l2sq + 0.5 * prm.delta * ea * f.b_l2sq + kn * eb * f.theta_l2sq + sigma_sq * kn / beta);
            u.push(prm.eps * l.u_l2sq + prm.delta * l.b_l2sq + l.theta_lp * l.theta_lp);
        }
        checks.push(moment_check("decaying_weight_energy", eta, &x4, &y4));
        if p == 3.0 {
            uniform = Some(mean_stderr(&u.iter().map(|v| (eta * v).exp()).collect::<Vec<_>>()).0);
        }
    }
    Ok(MomentReport { eta, p, n_traj: n, checks, uniform_functional: uniform })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_oracle_limits() {
        assert_eq!(drifted_brownian_tail(0.5, 1.0, 0.0), 1.0);
        // Zero drift: reflection gives 2(1 − Φ(K/√T)).
        let p = drifted_brownian_tail(0.0, 4.0, 1.0);
        assert!((p - 2.0 * (1.0 - normal_cdf(0.5))).abs() < 1e-14);
        // Infinite horizon tail is e^{−2μK}.
        assert!((drifted_brownian_tail(0.5, 1e8, 2.0) - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn brownian_monte_carlo_matches_oracle() {
        let gamma = 1.0;
        let t = brownian_tail_test(gamma, &[0.5, 1.0], 4000, 4.0, 2000, 11).unwrap();
        for r in &t.rows {
            let exact = drifted_brownian_tail(gamma / 2.0, 4.0, r.k);
            // Discrete monitoring misses excursions, so the estimate sits slightly below.
            assert!(r.empirical <= exact + 4.0 * r.stderr);
            assert!(r.empirical >= exact - 0.05 - 4.0 * r.stderr);
        }
        assert!(t.passed());
    }

    #[test]
    fn series_vanishes_without_data() {
        let gp = GronwallParams { t_const: 0.0, c: 1.0, eps_plus_delta: 0.0, sigma_sq_t: 1.0, eta: 0.5, t: 1.0, gamma: 0.1 };
        let s = gronwall_series_bound(&gp).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn series_rejects_divergent_gamma() {
        let gp = GronwallParams { t_const: 1.0, c: 1.0, eps_plus_delta: 0.1, sigma_sq_t: 1.0, eta: 0.5, t: 1.0, gamma: 1.0 / 3.0 };
        assert!(gronwall_series_bound(&gp).is_err());
        assert!(gronwall_series_bound(&GronwallParams { gamma: 0.33, ..gp }).is_ok());
    }

    fn partial_plus_tail(gp: &GronwallParams, m: usize) -> (f64, f64) {
        let partial: f64 = (1..=m).map(|k| gp.term(k as f64)).sum();
        let q = gp.ratio() * (1.0 + 1.0 / m as f64).powf(2.0 * gp.gamma);
        (partial, gp.term(m as f64) * q / (1.0 - q))
    }

    #[test]
    fn series_matches_partial_sum_plus_tail() {
        let gp = GronwallParams { t_const: 0.3, c: 1.0, eps_plus_delta: 0.02, sigma_sq_t: 2.0, eta: 1.0, t: 0.5, gamma: 0.2 };
        let s = gronwall_series_bound(&gp).unwrap();
        let (partial, tail) = partial_plus_tail(&gp, 64);
        assert!(tail < 1e-12 * partial);
        assert!((s.value - partial).abs() <= 1e-10 * partial);
        assert!(s.tail_bound <= 1e-10 * s.value);
        // Slow decay: thousands of terms.
        let slow = GronwallParams { gamma: 0.33, eta: 0.5, t: 1.0, ..gp };
        let s = gronwall_series_bound(&slow).unwrap();
        let (partial, tail) = partial_plus_tail(&slow, 200_000);
        assert!(s.terms > 64);
        assert!(s.value <= partial + tail && (s.value - partial).abs() <= 1e-10 * partial);
    }

    #[test]
    fn series_scales_with_eps_plus_delta() {
        let gp = GronwallParams { t_const: 0.0, c: 1.0, eps_plus_delta: 0.04, sigma_sq_t: 1.0, eta: 1.0, t: 0.5, gamma: 0.25 };
        let a = gronwall_series_bound(&gp).unwrap().value;
        let b = gronwall_series_bound(&GronwallParams { eps_plus_delta: 0.02, ..gp }).unwrap().value;
        assert!((b / a - 0.5f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn tail_table_counts() {
        let t = tail_table(1.0, &[0.0, 1.0], &[0.0, 0.5, 2.0, 3.0]).unwrap();
        assert_eq!(t.rows[0].empirical, 1.0);
        assert_eq!(t.rows[1].empirical, 0.5);
        assert!(t.rows[0].pass);
    }
}
