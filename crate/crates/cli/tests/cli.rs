use std::path::Path;
use std::process::{Command, Output};

fn mslab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mslab")).current_dir(dir).env_remove("MSLAB_OUT").args(args).output().unwrap()
}

fn simulate(dir: &Path, out: &str) -> Output {
    mslab(dir, &["--seed", "7", "--out", out, "simulate", "--system", "limit", "--n-traj", "3", "--horizon", "0.2"])
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path(), "a").status.success());
    assert!(simulate(tmp.path(), "b").status.success());
    let a = std::fs::read(tmp.path().join("a/trajectories.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/trajectories.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(b"# mslab trajectories v1\n"));
    let snap = |d: &str| std::fs::read(tmp.path().join(d).join("snapshots/traj_000002.mslb")).unwrap();
    assert_eq!(snap("a"), snap("b"));
}

#[test]
fn hormander_covers_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mslab(tmp.path(), &["--out", "h", "hormander", "--N", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("covered"));
    let cert = std::fs::read_to_string(tmp.path().join("h/certificate.txt")).unwrap();
    assert!(cert.lines().count() > 0 && cert.lines().all(|l| l.starts_with("gen=")));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("h/hormander.json")).unwrap()).unwrap();
    assert_eq!(summary["closure"]["covered"], true);
    assert_eq!(summary["replay_ok"], true);
}

#[test]
fn hormander_vertical_seed_is_not_covered() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mslab(tmp.path(), &["--out", "h", "hormander-check", "--N", "3", "--seeds", "e3"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn moments_report_has_margins() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path(), "run").status.success());
    let o = mslab(tmp.path(), &["--out", "rep", "moments", "--input", "run", "--eta", "0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("rep/moments.csv")).unwrap();
    assert!(csv.starts_with("# mslab moments v1\n"));
    assert!(csv.lines().count() >= 5, "{csv}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("margin"));
}

#[test]
fn moments_rejects_eta_above_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path(), "run").status.success());
    let o = mslab(tmp.path(), &["--out", "rep", "moments", "--input", "run", "--eta", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wasserstein_of_identical_ensembles_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path(), "a").status.success());
    for metric in ["rho", "rho-tilde", "rho-star"] {
        let o = mslab(tmp.path(), &["wasserstein", "--a", "a/snapshots", "--b", "a/snapshots", "--metric", metric, "--eta", "0.01"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let s = String::from_utf8_lossy(&o.stdout);
        assert!(s.contains("upper 0.0000000000e0") && s.contains("permutation [0, 1, 2]"), "{s}");
    }
}

#[test]
fn malformed_config_is_a_usage_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "grid_n = 8\n[physics]\nkappa = \"hot\"\n").unwrap();
    let o = mslab(tmp.path(), &["--config", "bad.toml", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let e = String::from_utf8_lossy(&o.stderr);
    assert!(e.contains("kappa") && e.contains("line 3"), "{e}");
}

#[test]
fn out_env_is_overridden_by_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mslab"))
        .current_dir(tmp.path())
        .env("MSLAB_OUT", "from_env")
        .args(["simulate", "--n-traj", "1", "--horizon", "0.04"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from_env/trajectories.csv").exists());
    assert!(simulate(tmp.path(), "from_flag").status.success());
    assert!(tmp.path().join("from_flag/trajectories.csv").exists());
}
