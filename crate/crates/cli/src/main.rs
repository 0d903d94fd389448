use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mslab::config::ExperimentConfig;
use mslab::diagnostics::moment_report_from;
use mslab::dynamics::{run_ensemble, SystemKind, SystemState, VelocityInit};
use mslab::experiments::{run_convergence, run_stationary};
use mslab::hormander::{constructive_path, replay_certificate, span_closure, Direction, SpanReport, DEFAULT_TOL};
use mslab::io::{
    group_rows, read_snapshot_dir, read_table_file, trajectory_rows, write_snapshot, write_table_file, ObservationRow, Snapshot,
    TRAJECTORY_SCHEMA,
};
use mslab::metrics::{lift, rho_bounds, rho_star, rho_tilde, wasserstein, EmpiricalMeasure, MetricParams};
use mslab::spectral::PhysParams;
use mslab::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_NOT_COVERED: u8 = 4;
const EXIT_CHECK: u8 = 5;

#[derive(Parser)]
#[command(name = "mslab", version, about = "Stochastic magnetostrophic MHD laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration and MSLAB_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Limit,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Rho,
    RhoTilde,
    RhoStar,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an ensemble and write trajectories.csv plus terminal snapshots.
    Simulate {
        #[arg(long, value_enum)]
        system: Option<SystemArg>,
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Finite-time convergence of the full system to the limit.
    Convergence {
        /// Offset the initial velocity and field by a fixed solenoidal field of this amplitude.
        #[arg(long)]
        mismatch: Option<f64>,
        #[arg(long)]
        n_traj: Option<usize>,
    },
    /// Wasserstein distance between spun-up full and lifted limit ensembles.
    Stationary {
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        burn_in: Option<f64>,
    },
    /// Bracket closure of the forced directions.
    #[command(alias = "hormander-check")]
    Hormander {
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        /// Comma-separated wavevectors `kx:ky:kz`, optionally `/m` for one parity; `e1`, `e2`, `e3` are shorthands.
        #[arg(long, default_value = "e1,e2,e3")]
        seeds: String,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Background field direction `bx,by,bz`.
        #[arg(long, allow_hyphen_values = true)]
        b0: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 64)]
        max_generations: usize,
    },
    /// Wasserstein bracket between two snapshot directories.
    Wasserstein {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value = "rho")]
        metric: MetricArg,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Exponential moment report for a recorded ensemble.
    Moments {
        /// Directory written by `simulate`; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        eta: f64,
        /// `L^p` exponent; must match the recorded one.
        #[arg(long)]
        p: Option<f64>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BlowUp { .. } => EXIT_BLOWUP,
            Error::Format(_) | Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_FAILURE, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.into() }
}

type Res<T> = std::result::Result<T, Failure>;

fn load_config(c: &Common) -> Res<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &ExperimentConfig) -> Res<PathBuf> {
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from(cfg.resolved_output_dir()));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Res<()> {
    fs::write(path, serde_json::to_string_pretty(v).expect("json values serialize") + "\n")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Res<()> {
    let mut cfg = load_config(&cli.common)?;
    match cli.cmd {
        Cmd::Simulate { system, n_traj, horizon, grid, eps, delta } => {
            if let Some(s) = system {
                cfg.system = match s {
                    SystemArg::Limit => SystemKind::Limit,
                    SystemArg::Full => SystemKind::Full,
                };
            }
            cfg.n_traj = n_traj.unwrap_or(cfg.n_traj);
            cfg.horizon = horizon.unwrap_or(cfg.horizon);
            cfg.grid_n = grid.unwrap_or(cfg.grid_n);
            cfg.physics.eps = eps.unwrap_or(cfg.physics.eps);
            cfg.physics.delta = delta.unwrap_or(cfg.physics.delta);
            cfg.validate()?;
            simulate(&cli.common, &cfg)
        }
        Cmd::Convergence { mismatch, n_traj } => {
            if let Some(a) = mismatch {
                cfg.velocity_init = VelocityInit::Offset(a);
            }
            cfg.n_traj = n_traj.unwrap_or(cfg.n_traj);
            let dir = out_dir(&cli.common, &cfg)?;
            let table = run_convergence(&cfg.convergence_spec()?)?;
            write_table_file(&dir.join("convergence.csv"), "convergence", &table.rows)?;
            println!("eps,delta,theta_err,field_err");
            for r in &table.rows {
                println!("{},{},{:.6e},{:.6e}", r.eps, r.delta, r.theta_err, r.field_err);
            }
            let (th, fi) = table.strictly_decreasing();
            println!("theta slope {:.4}, field slope {:.4}", table.theta_slope, table.field_slope);
            write_json(
                &dir.join("convergence.json"),
                &serde_json::json!({ "table": table, "theta_decreasing": th, "field_decreasing": fi }),
            )?;
            if !(th && fi) {
                return Err(Failure { code: EXIT_CHECK, msg: "errors are not strictly decreasing in eps + delta".into() });
            }
            Ok(())
        }
        Cmd::Stationary { n_samples, burn_in } => {
            cfg.stationary.n_samples = n_samples.unwrap_or(cfg.stationary.n_samples);
            if burn_in.is_some() {
                cfg.stationary.burn_in = burn_in;
            }
            let dir = out_dir(&cli.common, &cfg)?;
            let table = run_stationary(&cfg.stationary_spec()?)?;
            println!("burn-in {}", table.burn_in);
            println!("eps,delta,lower,path_upper,upper");
            for r in &table.rows {
                let b = &r.bracket;
                println!("{},{},{:.6e},{:.6e},{:.6e}", r.eps, r.delta, b.lower, b.path_upper, b.upper);
            }
            let s = &table.split_half;
            println!("split-half limit ensemble: {:.6e} {:.6e} {:.6e}", s.lower, s.path_upper, s.upper);
            write_json(&dir.join("stationary.json"), &serde_json::to_value(&table).expect("serializable"))?;
            if !table.upper_monotone() {
                return Err(Failure { code: EXIT_CHECK, msg: "upper bracket is not monotone in eps + delta".into() });
            }
            Ok(())
        }
        Cmd::Hormander { n, seeds, nu, lambda, b0, tol, max_generations } => {
            let mut p = cfg.physics;
            p.nu = nu.unwrap_or(p.nu);
            p.lambda = lambda.unwrap_or(p.lambda);
            if let Some(b) = b0 {
                p.b0 = parse_vec3(&b)?;
            }
            let seeds = parse_seeds(&seeds)?;
            hormander(&cli.common, &cfg, n, &seeds, &p, tol, max_generations)
        }
        Cmd::Wasserstein { a, b, metric, eta } => {
            let sa = read_snapshot_dir(&a)?;
            let sb = read_snapshot_dir(&b)?;
            let m = match eta {
                Some(e) => MetricParams::new(e)?,
                None => cfg.metric_params()?,
            };
            let params = sa[0].params;
            let res = match metric {
                MetricArg::Rho => {
                    let ma = EmpiricalMeasure::new(sa.iter().map(|s| s.state.theta().clone()).collect());
                    let mb = EmpiricalMeasure::new(sb.iter().map(|s| s.state.theta().clone()).collect());
                    wasserstein(&ma, &mb, |x, y| rho_bounds(x, y, &m))?
                }
                MetricArg::RhoStar => {
                    let ma = EmpiricalMeasure::new(sa.iter().map(|s| s.state.theta().clone()).collect());
                    let mb = EmpiricalMeasure::new(sb.iter().map(|s| s.state.theta().clone()).collect());
                    wasserstein(&ma, &mb, |x, y| rho_star(x, y, &params, &m))?
                }
                MetricArg::RhoTilde => {
                    let full = |v: &[Snapshot]| -> Res<Vec<_>> {
                        v.iter()
                            .map(|s| match &s.state {
                                SystemState::Full(f) => Ok(f.clone()),
                                SystemState::Limit(l) => Ok(lift(&l.theta, &s.params)?),
                            })
                            .collect()
                    };
                    wasserstein(&EmpiricalMeasure::new(full(&sa)?), &EmpiricalMeasure::new(full(&sb)?), |x, y| rho_tilde(x, y, &m))?
                }
            };
            println!("n = {}, eta = {}", res.n, m.eta);
            println!("lower {:.10e}", res.lower);
            println!("path_upper {:.10e}", res.path_upper);
            println!("upper {:.10e}", res.upper);
            println!("permutation {:?}", res.upper_assignment);
            if cli.common.out.is_some() {
                let dir = out_dir(&cli.common, &cfg)?;
                write_json(&dir.join("wasserstein.json"), &serde_json::to_value(&res).expect("serializable"))?;
            }
            Ok(())
        }
        Cmd::Moments { input, eta, p } => {
            let dir = match input {
                Some(d) => d,
                None => out_dir(&cli.common, &cfg)?,
            };
            let rec_cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
            let rows: Vec<ObservationRow> = read_table_file(&dir.join("trajectories.csv"), TRAJECTORY_SCHEMA)?;
            let grouped = group_rows(&rows);
            let series: Vec<&[mslab::dynamics::Observation]> = grouped.iter().map(|(_, v)| v.as_slice()).collect();
            let p = p.unwrap_or(rec_cfg.lp);
            if p != rec_cfg.lp {
                return Err(usage(format!("p = {p} differs from the recorded exponent {}", rec_cfg.lp)));
            }
            let report = moment_report_from(rec_cfg.system, &rec_cfg.physics, &rec_cfg.noise_config()?, &series, eta, p)?;
            let out = out_dir(&cli.common, &cfg)?;
            write_table_file(&out.join("moments.csv"), "moments", &report.checks)?;
            println!("name,lhs,rhs,fitted_c,margin,saturated");
            for c in &report.checks {
                println!("{},{:.6e},{:.6e},{:.6e},{:.6e},{}", c.name, c.lhs, c.rhs, c.fitted_c, c.rhs - c.lhs, c.saturated);
            }
            if let Some(u) = report.uniform_functional {
                println!("uniform functional {u:.6e}");
            }
            write_json(&out.join("moments.json"), &serde_json::to_value(&report).expect("serializable"))?;
            Ok(())
        }
    }
}

fn simulate(common: &Common, cfg: &ExperimentConfig) -> Res<()> {
    let dir = out_dir(common, cfg)?;
    let spec = cfg.ensemble_spec()?;
    let rec = run_ensemble(&spec)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    write_table_file(&dir.join("trajectories.csv"), TRAJECTORY_SCHEMA, &trajectory_rows(&rec.trajectories))?;
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    for t in &rec.trajectories {
        let s = Snapshot { traj: t.traj, params: rec.params, state: t.terminal.clone() };
        write_snapshot(&snaps.join(format!("traj_{:06}.mslb", t.traj)), &s)?;
    }
    println!("wrote {} trajectories to {}", rec.trajectories.len(), dir.display());
    Ok(())
}

fn hormander(common: &Common, cfg: &ExperimentConfig, n: usize, seeds: &[Direction], p: &PhysParams, tol: f64, max_gen: usize) -> Res<()> {
    let report = span_closure(seeds, n, p, tol, max_gen)?;
    let replay = replay_certificate(seeds, &report, p, tol)?;
    let axes = is_unit_axes(seeds);
    let constructive = if axes { Some(constructive_path(n, p, tol)?) } else { None };
    let dir = out_dir(common, cfg)?;
    fs::write(dir.join("certificate.txt"), certificate_text(&report))?;
    write_json(
        &dir.join("hormander.json"),
        &serde_json::json!({
            "closure": report,
            "replay_ok": replay,
            "constructive_covered": constructive.as_ref().map(|c| c.covered),
            "constructive_k_plane": constructive.as_ref().and_then(|c| c.k_plane),
        }),
    )?;
    println!(
        "N = {n}: {} after {} generation(s), {} certificate steps, {} near-degenerate",
        if report.covered { "covered" } else { "not covered" },
        report.n_of_n.map_or("-".into(), |g| g.to_string()),
        report.certificate.len(),
        report.near_degenerate.len()
    );
    if let Some(c) = &constructive {
        println!("constructive path: {}", if c.covered { "covered" } else { "not covered" });
    }
    if !report.covered {
        let shown: Vec<String> = report.missing.iter().take(8).map(|d| d.to_string()).collect();
        println!("missing: {}{}", shown.join(" "), if report.missing.len() > 8 { " ..." } else { "" });
        return Err(Failure { code: EXIT_NOT_COVERED, msg: "bracket closure does not cover the target frequencies".into() });
    }
    if !replay || constructive.is_some_and(|c| !c.covered) {
        return Err(Failure { code: EXIT_CHECK, msg: "certificate replay or constructive path disagrees".into() });
    }
    Ok(())
}

fn certificate_text(r: &SpanReport) -> String {
    let fmt = |k: [i32; 3]| format!("({},{},{})", k[0], k[1], k[2]);
    let mut s = String::new();
    for st in &r.certificate {
        let produced: Vec<String> = st.produced.iter().map(|&k| fmt(k)).collect();
        s += &format!(
            "gen={} parent={} seed={} lhs={:.12e} rhs={:.12e} margin={:.6e} verdict={:?} produced={}\n",
            st.generation,
            fmt(st.parent),
            fmt(st.seed),
            st.condition.lhs,
            st.condition.rhs,
            st.condition.margin,
            st.condition.verdict,
            produced.join(",")
        );
    }
    s
}

fn is_unit_axes(seeds: &[Direction]) -> bool {
    let mut v: Vec<Direction> = seeds.to_vec();
    v.sort();
    let mut want: Vec<Direction> =
        [[1, 0, 0], [0, 1, 0], [0, 0, 1]].iter().flat_map(|&k| (0..2).map(move |parity| Direction { k, parity })).collect();
    want.sort();
    v == want
}

fn parse_vec3(s: &str) -> Res<[f64; 3]> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| usage(format!("b0: {e}")))?;
    v.try_into().map_err(|_| usage("b0 needs three components"))
}

fn parse_seeds(s: &str) -> Res<Vec<Direction>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (kpart, parity) = match item.split_once('/') {
            Some((k, m)) => (k, Some(m.parse::<u8>().map_err(|e| usage(format!("seed {item}: {e}")))?)),
            None => (item, None),
        };
        let k = match kpart {
            "e1" => [1, 0, 0],
            "e2" => [0, 1, 0],
            "e3" => [0, 0, 1],
            _ => {
                let v: Vec<i32> = kpart
                    .split(':')
                    .map(|x| x.parse::<i32>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| usage(format!("seed {item}: {e}")))?;
                v.try_into().map_err(|_| usage(format!("seed {item}: expected kx:ky:kz")))?
            }
        };
        match parity {
            Some(m) => out.push(Direction { k, parity: m }),
            None => out.extend((0..2).map(|m| Direction { k, parity: m })),
        }
    }
    if out.is_empty() {
        return Err(usage("no seeds given"));
    }
    Ok(out)
}
