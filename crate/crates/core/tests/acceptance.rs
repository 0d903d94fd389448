//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//!
//! Runs without the libtest harness so the lines always reach stdout. An optional
//! argument keeps only the criteria whose name contains it, e.g. `c07`.

use std::time::Instant;

use itertools::Itertools;
use mslab::diagnostics::{
    brownian_tail_test, dissipation_balance, drifted_brownian_tail, energy_residual, gamma_max, gronwall_series_bound,
    martingale_tail_test, GronwallParams,
};
use mslab::dynamics::{
    first_variation, run_ensemble, second_variation, EnsembleSpec, InitialSampler, LimitModel, LimitState, StepConfig, SystemKind,
    ThetaPath, VelocityInit,
};
use mslab::experiments::{run_contraction, run_convergence, run_stationary, ContractionSpec, ConvergenceSpec, StationarySpec};
use mslab::hormander::{
    bracket_pair, constructive_path, replay_certificate, span_closure, Direction, NumericBracket, DEFAULT_TOL,
};
use mslab::metrics::{rho_bounds, solve_assignment, MetricParams};
use mslab::noise::NoiseConfig;
use mslab::spectral::grid::norm_sq;
use mslab::spectral::{apply_q_inverse_drive, Grid, PhysParams, SpectralScalar, SymbolTable};
use mslab::spectral::{symbol_mb, symbol_mu};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: String, start: Instant) {
    println!(
        "criterion {id:>2} [{name}]: {} ({detail}; {:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
}

fn axes() -> Vec<Direction> {
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]].iter().flat_map(|&k| (0..2).map(move |parity| Direction { k, parity })).collect()
}

fn random_field(grid: &std::sync::Arc<Grid>, seed: u64, amp: f64) -> SpectralScalar {
    InitialSampler::Gaussian { radius: 100.0, amplitude: amp, seed }.sample(grid, 0).unwrap()
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn c01_constitutive_routes_agree() -> bool {
    let t0 = Instant::now();
    let g = Grid::new(16).unwrap();
    let p = PhysParams::default();
    let table = SymbolTable::new(&g, &p).unwrap();
    let mut worst = 0.0f64;
    for s in 0..100 {
        let th = random_field(&g, s, 1.0);
        let closed = table.velocity(&th);
        let solved = apply_q_inverse_drive(&th, &p).unwrap();
        worst = worst.max(solved.sub(&closed).l2() / closed.l2());
        // Induction balance (B₀·∇)u + Δb = 0 checked with the spectral operators.
        let b = table.magnetic(&th);
        for a in 0..3 {
            let lap = b.comps[a].laplacian();
            let mut r = lap.clone();
            for (d, c) in p.b0.iter().enumerate() {
                r.axpy(*c, &solved.comps[a].derivative(d));
            }
            if lap.l2() > 0.0 {
                worst = worst.max(r.l2() / lap.l2());
            }
        }
    }
    let pass = worst <= 1e-10;
    report(1, "constitutive symbol vs per-mode solve", pass, format!("max relative L2 error {worst:.2e} over 100 fields at 16^3"), t0);
    pass
}

fn smoothing_scan(r: i32, p: &PhysParams) -> (f64, f64) {
    let (mut su, mut sb) = (0.0f64, 0.0f64);
    for a in 0..=r {
        for b in -r..=r {
            for c in -r..=r {
                let k = [a, b, c];
                let q = norm_sq(k);
                // Symbols are even in k, so half the lattice suffices.
                if q == 0.0 || q > (r * r) as f64 || (a == 0 && (b < 0 || (b == 0 && c < 0))) {
                    continue;
                }
                let mu = symbol_mu(k, p).unwrap();
                let mb = symbol_mb(k, p).unwrap();
                let nu = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = mb.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                su = su.max(nu * q);
                sb = sb.max(nb * q.powf(1.5));
            }
        }
    }
    (su, sb)
}

fn c02_smoothing_orders() -> bool {
    let t0 = Instant::now();
    let p = PhysParams::default();
    let (u32_, b32) = smoothing_scan(32, &p);
    let (u64_, b64) = smoothing_scan(64, &p);
    let du = (u64_ - u32_).abs() / u64_;
    let db = (b64 - b32).abs() / b64;
    let pass = u64_.is_finite() && b64.is_finite() && du < 0.01 && db < 0.01;
    report(
        2,
        "smoothing orders",
        pass,
        format!("sup|M_u||k|^2 = {u32_:.6} / {u64_:.6}, sup|M_b||k|^3 = {b32:.6} / {b64:.6} at radius 32 / 64"),
        t0,
    );
    pass
}

fn c03_linear_law_matches_ornstein_uhlenbeck() -> bool {
    let t0 = Instant::now();
    let alpha = 1.0;
    let p = PhysParams::default();
    let step = StepConfig { dt: 0.01, advection: false };
    let spec = EnsembleSpec {
        system: SystemKind::Limit,
        grid_n: 8,
        params: p,
        step,
        noise: NoiseConfig::unit_axes(alpha, 3),
        horizon: 6.0,
        n_traj: 10_000,
        first_traj: 0,
        initial: InitialSampler::Zero,
        velocity_init: VelocityInit::Matched,
        record_every: 600,
        lp: 2.0,
        stop_level: None,
    };
    let rec = run_ensemble(&spec).unwrap();
    let mut worst_z = 0.0f64;
    let mut detail = Vec::new();
    for d in axes() {
        let sq: Vec<f64> = rec.trajectories.iter().map(|t| t.terminal.theta().mode_coordinate(d.k, d.parity).powi(2)).collect();
        let (m, se) = mean_stderr(&sq);
        let want = alpha * alpha / (2.0 * p.kappa * norm_sq(d.k));
        let z = (m - want).abs() / se;
        worst_z = worst_z.max(z);
        detail.push(format!("{d}: {m:.4}"));
    }
    let pass = worst_z <= 3.0;
    report(3, "OU second moments", pass, format!("target 0.5, worst |z| = {worst_z:.2}; {}", detail.join(", ")), t0);
    pass
}

fn c04_stationary_energy_balance() -> bool {
    let t0 = Instant::now();
    let p = PhysParams::default();
    let noise = NoiseConfig::unit_axes(0.5, 4);
    let spec = EnsembleSpec {
        system: SystemKind::Limit,
        grid_n: 16,
        params: p,
        step: StepConfig::new(5e-3),
        noise: noise.clone(),
        horizon: 130.0,
        n_traj: 8,
        first_traj: 0,
        initial: InitialSampler::Zero,
        velocity_init: VelocityInit::Matched,
        record_every: 100,
        lp: 2.0,
        stop_level: None,
    };
    let rec = run_ensemble(&spec).unwrap();
    let bal = dissipation_balance(&rec, 5.0).unwrap();
    // The per-step Itô ledger needs every step recorded, so it runs on a short separate record.
    let short = run_ensemble(&EnsembleSpec { horizon: 1.0, n_traj: 1, record_every: 1, ..spec.clone() }).unwrap();
    let ledger = energy_residual(&short.trajectories[0], &p, noise.hs_norm_sq(), spec.step.dt).unwrap();
    // Nonlinearity check: transport is not negligible against diffusion.
    let last = rec.trajectories[0].observations.last().unwrap();
    let pass = bal.rel_error <= 0.05;
    report(
        4,
        "stationary energy balance",
        pass,
        format!(
            "kappa<|grad theta|^2> = {:.4} +- {:.4}, |sigma|^2/2 = {:.4}, rel err {:.3}; mean per-step Ito residual {:.1e} against injection {:.1e} per step; |u|_L2 {:.2}",
            bal.dissipation,
            bal.stderr,
            bal.injection,
            bal.rel_error,
            ledger.rows.iter().map(|r| r.residual).sum::<f64>() / ledger.rows.len() as f64,
            0.5 * noise.hs_norm_sq() * spec.step.dt,
            last.u_l2sq.sqrt()
        ),
        t0,
    );
    pass
}

fn c05_bracket_formula_matches_finite_differences() -> bool {
    let t0 = Instant::now();
    let p = PhysParams::default();
    let mut nb = NumericBracket::new(32, &p).unwrap();
    let base = SpectralScalar::zeros(nb.grid());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let k = [rng.random_range(-4..=4), rng.random_range(-4..=4), rng.random_range(-4..=4)];
        if k != [0, 0, 0] && norm_sq(k) <= 16.0 {
            return k;
        }
    };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (k, j) = (draw(&mut rng), draw(&mut rng));
        let (m, m2) = (rng.random_range(0..2u8), rng.random_range(0..2u8));
        let num = nb.evaluate(k, m, j, m2, &base, 0.5).unwrap();
        let num = nb.project(&num);
        let mut sym = std::collections::BTreeMap::new();
        for (d, c) in bracket_pair(k, m, j, m2, &p).unwrap() {
            *sym.entry(d).or_insert(0.0) += c;
        }
        let keys: Vec<Direction> = num.keys().chain(sym.keys()).copied().sorted().dedup().collect();
        let diff: f64 = keys.iter().map(|d| (num.get(d).unwrap_or(&0.0) - sym.get(d).unwrap_or(&0.0)).powi(2)).sum::<f64>().sqrt();
        let size: f64 = sym.values().map(|v| v * v).sum::<f64>().sqrt();
        let err = if size > 1e-12 { diff / size } else { diff };
        worst = worst.max(err);
    }
    let pass = worst <= 1e-6;
    report(5, "bracket formula vs finite differences", pass, format!("max relative error {worst:.2e} over 50 pairs"), t0);
    pass
}

fn c06_hormander_coverage() -> bool {
    let t0 = Instant::now();
    let p = PhysParams::default();
    let seeds = axes();
    let r = span_closure(&seeds, 3, &p, DEFAULT_TOL, 64).unwrap();
    let replay = replay_certificate(&seeds, &r, &p, DEFAULT_TOL).unwrap();
    let c = constructive_path(3, &p, DEFAULT_TOL).unwrap();
    let vertical: Vec<Direction> = (0..2).map(|parity| Direction { k: [0, 0, 1], parity }).collect();
    let d = span_closure(&vertical, 3, &p, DEFAULT_TOL, 64).unwrap();
    let pass = r.covered && replay && c.covered && !d.covered;
    report(
        6,
        "bracket spanning",
        pass,
        format!(
            "axes: covered = {} in {:?} generations, {} steps, replay = {replay}; constructive = {}; e3 alone covered = {}",
            r.covered,
            r.n_of_n,
            r.certificate.len(),
            c.covered,
            d.covered
        ),
        t0,
    );
    pass
}

fn convergence_spec(velocity_init: VelocityInit) -> ConvergenceSpec {
    ConvergenceSpec {
        grid_n: 8,
        params: PhysParams::default(),
        noise: NoiseConfig::unit_axes(0.5, 7),
        step: StepConfig::new(4e-3),
        horizon: 1.0,
        n_traj: 64,
        first_traj: 0,
        initial: InitialSampler::Gaussian { radius: 2.0, amplitude: 0.3, seed: 7 },
        velocity_init,
        eps_delta: vec![(1e-1, 1e-1), (1e-2, 1e-2), (1e-3, 1e-3)],
        p: 1.0,
    }
}

fn c07_finite_time_convergence() -> bool {
    let t0 = Instant::now();
    let t = run_convergence(&convergence_spec(VelocityInit::Matched)).unwrap();
    let (th, fi) = t.strictly_decreasing();
    let pass = th && fi && t.theta_slope > 0.2;
    let rows: Vec<String> = t.rows.iter().map(|r| format!("{:.0e}: {:.3e} / {:.3e}", r.eps, r.theta_err, r.field_err)).collect();
    report(
        7,
        "finite-time convergence",
        pass,
        format!("E sup|Theta-theta| / field H1 error: {}; slopes {:.3} / {:.3}", rows.join(", "), t.theta_slope, t.field_slope),
        t0,
    );
    pass
}

fn c08_initial_mismatch_robustness() -> bool {
    let t0 = Instant::now();
    let t = run_convergence(&convergence_spec(VelocityInit::Offset(1.0))).unwrap();
    let (th, _) = t.strictly_decreasing();
    let pass = th && t.theta_slope > 0.2;
    let rows: Vec<String> = t.rows.iter().map(|r| format!("{:.0e}: {:.3e}", r.eps, r.theta_err)).collect();
    report(8, "initial mismatch robustness", pass, format!("E sup|Theta-theta|: {}; slope {:.3}", rows.join(", "), t.theta_slope), t0);
    pass
}

fn c09_variation_solvers() -> bool {
    let t0 = Instant::now();
    let g = Grid::new(8).unwrap();
    let p = PhysParams::default();
    let model = LimitModel::new(&g, &p, &StepConfig::new(1e-2)).unwrap();
    let noise = NoiseConfig::unit_axes(0.5, 9);
    let sampler = mslab::noise::NoiseSampler::new(&g, &noise).unwrap();
    let th0 = InitialSampler::Gaussian { radius: 2.5, amplitude: 0.4, seed: 9 }.sample(&g, 0).unwrap();
    let path = ThetaPath::record(&model, LimitState { theta: th0.clone(), time: 0.0 }, 50, Some((&sampler, 0))).unwrap();
    let (s, t) = (0.0, 0.5);
    let n = path.index_of(t).unwrap();
    let xi = random_field(&g, 91, 1.0);
    let xi2 = random_field(&g, 92, 1.0);
    let flow = |d: &SpectralScalar| path.replay(0, &th0.add(d), n).unwrap();
    let base = flow(&SpectralScalar::zeros(&g));
    let j = first_variation(&path, &xi, s, t).unwrap();
    let first_err = |h: f64| flow(&xi.scaled(h)).sub(&base).scaled(1.0 / h).sub(&j).l2();
    let (e3, e4) = (first_err(1e-3), first_err(1e-4));
    let c = e3 / 1e-3;
    let r1 = e3 / e4;
    let j2 = second_variation(&path, &xi, &xi2, s, t).unwrap();
    // Four-point central mixed difference, error O(h^2).
    let second_err = |h: f64| {
        let pp = flow(&xi.add(&xi2).scaled(h));
        let pm = flow(&xi.sub(&xi2).scaled(h));
        let mp = flow(&xi.sub(&xi2).scaled(-h));
        let mm = flow(&xi.add(&xi2).scaled(-h));
        pp.sub(&pm).sub(&mp).add(&mm).scaled(1.0 / (4.0 * h * h)).sub(&j2).l2()
    };
    let (f2, f3) = (second_err(1e-2), second_err(1e-3));
    let r2 = f2 / f3;
    let pass = e4 <= 2.0 * c * 1e-4 && (5.0..20.0).contains(&r1) && (30.0..300.0).contains(&r2) && f3 <= 1e-4 * j2.l2();
    report(
        9,
        "variation solvers",
        pass,
        format!(
            "first: err {e3:.2e} / {e4:.2e} at h = 1e-3 / 1e-4 (ratio {r1:.2}, c = {c:.2e}); second: err {f2:.2e} / {f3:.2e} at h = 1e-2 / 1e-3 (ratio {r2:.1}, |J2| = {:.2e})",
            j2.l2()
        ),
        t0,
    );
    pass
}

fn c10_exponential_martingale_tails() -> bool {
    let t0 = Instant::now();
    let ks = [0.5, 1.0, 2.0, 4.0];
    let gamma = 1.0;
    let bm = brownian_tail_test(gamma, &ks, 20_000, 4.0, 400, 10).unwrap();
    // Independent check of the sampler against the reflection formula for the drifted supremum.
    let reflect: Vec<f64> = ks.iter().map(|&k| drifted_brownian_tail(gamma / 2.0, 4.0, k)).collect();
    let refl_ok = bm.rows.iter().zip(&reflect).all(|(r, &q)| r.empirical <= q + 3.0 * r.stderr + 1e-12 && q <= (-gamma * r.k).exp());

    let p = PhysParams::default();
    let noise = NoiseConfig::unit_axes(0.05, 10);
    let g = gamma_max(&p, noise.hs_norm_sq());
    let spec = EnsembleSpec {
        system: SystemKind::Limit,
        grid_n: 8,
        params: p,
        step: StepConfig::new(1e-2),
        noise,
        horizon: 2.0,
        n_traj: 2000,
        first_traj: 0,
        initial: InitialSampler::Gaussian { radius: 2.0, amplitude: 0.1, seed: 10 },
        velocity_init: VelocityInit::Matched,
        record_every: 1,
        lp: 2.0,
        stop_level: None,
    };
    let rec = run_ensemble(&spec).unwrap();
    let mt = martingale_tail_test(&rec, g, &ks).unwrap();
    let fmt = |t: &mslab::diagnostics::TailTable| t.rows.iter().map(|r| format!("{:.4}<={:.4}", r.empirical, r.bound)).join(" ");
    let pass = bm.passed() && refl_ok && mt.passed();
    report(
        10,
        "exponential martingale tails",
        pass,
        format!("Brownian gamma 1: {} (reflection ok = {refl_ok}); temperature gamma {g:.3e}: {}", fmt(&bm), fmt(&mt)),
        t0,
    );
    pass
}

fn c11_wasserstein_machinery() -> bool {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut assign_ok = true;
    for n in 1..=6 {
        for _ in 0..20 {
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let brute = (0..n).permutations(n).map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>()).fold(f64::INFINITY, f64::min);
            assign_ok &= (solve_assignment(&cost).unwrap().0 - brute).abs() < 1e-12;
        }
    }
    let g = Grid::new(8).unwrap();
    let m = MetricParams::new(0.01).unwrap();
    let mut sandwich_ok = true;
    for i in 0..100 {
        let b = rho_bounds(&random_field(&g, 2 * i, 0.05), &random_field(&g, 2 * i + 1, 0.05), &m).unwrap();
        sandwich_ok &= b.lower <= b.path_upper && b.path_upper <= b.upper;
    }
    let spec = StationarySpec {
        grid_n: 8,
        params: PhysParams::default(),
        noise: NoiseConfig::unit_axes(0.5, 11),
        step: StepConfig::new(1e-2),
        burn_in: None,
        n_samples: 128,
        first_traj: 0,
        initial: InitialSampler::Gaussian { radius: 2.0, amplitude: 0.3, seed: 11 },
        eps_delta: vec![(0.1, 0.1), (0.01, 0.01)],
        metric: m,
    };
    let st = run_stationary(&spec).unwrap();
    let mono = st.upper_monotone();
    let rows: Vec<String> = st.rows.iter().map(|r| format!("{}: [{:.3e}, {:.3e}]", r.eps, r.bracket.lower, r.bracket.upper)).collect();
    let pass = assign_ok && sandwich_ok && mono;
    report(
        11,
        "Wasserstein machinery",
        pass,
        format!(
            "assignment = brute force: {assign_ok}; sandwich on 100 pairs: {sandwich_ok}; stationary brackets {} (split-half upper {:.3e})",
            rows.join(", "),
            st.split_half.upper
        ),
        t0,
    );
    pass
}

fn c12_contraction_probe() -> bool {
    let t0 = Instant::now();
    let spec = ContractionSpec {
        grid_n: 8,
        params: PhysParams::default(),
        noise: NoiseConfig::unit_axes(0.5, 12),
        step: StepConfig::new(1e-2),
        n_samples: 128,
        first_traj: 0,
        initial_a: InitialSampler::Gaussian { radius: 2.0, amplitude: 0.1, seed: 12 },
        initial_b: InitialSampler::Gaussian { radius: 3.0, amplitude: 0.6, seed: 13 },
        checkpoints: vec![1.0, 2.0, 4.0, 8.0],
        metric: MetricParams::new(0.01).unwrap(),
        shared_noise: true,
    };
    let rows = run_contraction(&spec).unwrap();
    let ups: Vec<f64> = rows.iter().map(|r| r.bracket.upper).collect();
    let pass = ups.windows(2).all(|w| w[1] < w[0]);
    report(12, "contraction probe", pass, format!("upper brackets at t = 1, 2, 4, 8: {}", ups.iter().map(|u| format!("{u:.3e}")).join(", ")), t0);
    pass
}

fn c13_gronwall_series() -> bool {
    let t0 = Instant::now();
    let base = GronwallParams { t_const: 0.0, c: 1.0, eps_plus_delta: 0.02, sigma_sq_t: 0.5, eta: 0.05, t: 0.01, gamma: 0.3 };
    let s = gronwall_series_bound(&base).unwrap();
    let converged = s.tail_bound < 1e-10 * s.value;
    let lim = base.gamma_limit();
    let rejects = gronwall_series_bound(&GronwallParams { gamma: lim, ..base }).is_err()
        && gronwall_series_bound(&GronwallParams { gamma: lim * 1.01, ..base }).is_err();
    let mut worst = 0.0f64;
    for e in [0.02, 0.01, 0.005] {
        let a = gronwall_series_bound(&GronwallParams { eps_plus_delta: e, ..base }).unwrap().value;
        let b = gronwall_series_bound(&GronwallParams { eps_plus_delta: e / 2.0, ..base }).unwrap().value;
        worst = worst.max(((a / b) / 2f64.powf(base.gamma) - 1.0).abs());
    }
    let pass = converged && rejects && worst < 1e-8;
    report(
        13,
        "Gronwall series",
        pass,
        format!(
            "value {:.6e} with tail bound {:.1e} after {} terms; rejects gamma >= {lim:.4}: {rejects}; halving ratio off 2^gamma by {worst:.1e}",
            s.value, s.tail_bound, s.terms
        ),
        t0,
    );
    pass
}

fn main() -> std::process::ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> bool); 13] = [
        ("c01_constitutive_routes_agree", c01_constitutive_routes_agree),
        ("c02_smoothing_orders", c02_smoothing_orders),
        ("c03_linear_law_matches_ornstein_uhlenbeck", c03_linear_law_matches_ornstein_uhlenbeck),
        ("c04_stationary_energy_balance", c04_stationary_energy_balance),
        ("c05_bracket_formula_matches_finite_differences", c05_bracket_formula_matches_finite_differences),
        ("c06_hormander_coverage", c06_hormander_coverage),
        ("c07_finite_time_convergence", c07_finite_time_convergence),
        ("c08_initial_mismatch_robustness", c08_initial_mismatch_robustness),
        ("c09_variation_solvers", c09_variation_solvers),
        ("c10_exponential_martingale_tails", c10_exponential_martingale_tails),
        ("c11_wasserstein_machinery", c11_wasserstein_machinery),
        ("c12_contraction_probe", c12_contraction_probe),
        ("c13_gronwall_series", c13_gronwall_series),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        ran += 1;
        if !std::panic::catch_unwind(run).unwrap_or(false) {
            failed.push(name);
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        std::process::ExitCode::FAILURE
    }
}
