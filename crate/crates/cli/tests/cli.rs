use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn netheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netheat")).args(args).output().expect("run netheat")
}

fn run_in(dir: &Path, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    netheat(&args)
}

const ZERO: &str = r#"
[run]
horizon = 1.0
t = [0.5, 1.0]
points = 11

[[rod]]
id = "a"
length = 1.0
sigma = 1.0
from = "J"
to = "e1"

[[rod]]
id = "b"
length = 2.0
sigma = 0.5
from = "J"
to = "e2"

[[vertex]]
id = "J"
kind = "interface"

[[vertex]]
id = "e1"
kind = "dirichlet"

[[vertex]]
id = "e2"
kind = "neumann"

[[initial]]
rod = "a"
q0 = "0"

[[initial]]
rod = "b"
q0 = "0"
"#;

#[test]
fn star_agrees_with_oracle() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &config("three_rod_star.toml"), &["--solver", "both", "--assert-tol", "1e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp = fs::read_to_string(out.path().join("comparison.csv")).unwrap();
    let all = cmp.lines().find(|l| l.starts_with("all,")).unwrap();
    let max: f64 = all.split(',').nth(1).unwrap().parse().unwrap();
    assert!(max < 1e-3, "{max}");
    for f in ["utm_r1.csv", "fdm_r3.csv", "plot.gp", "diagnostics.json"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["configuration"], "finite star");
    assert!(diag["utm"]["radius"].as_f64().unwrap() >= 1.0);
    assert!(diag["utm"]["zero_scan"]["zeros"].as_array().unwrap().is_empty());
    assert!(diag["utm"]["max_continuity"].as_f64().unwrap() < 1e-4);
}

#[test]
fn tight_tolerance_exits_4() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &config("three_rod_star.toml"), &["--solver", "both", "--assert-tol", "1e-12", "--nodes", "21"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds"));
}

#[test]
fn infinite_rod_at_junction_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &config("infinite_at_junction.toml"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infinite rod r2 ends at vertex J"));
}

#[test]
fn bad_documents_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [ZERO.replace("t = [0.5, 1.0]", "t = [0.0, 1.0]"), ZERO.replace("kind = \"neumann\"", "kind = \"sticky\""), "not toml [".to_string()];
    for (k, text) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("bad{k}.toml"));
        fs::write(&cfg, text).unwrap();
        let o = run_in(&dir.path().join("out"), &cfg, &[]);
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = netheat(&["--config", "/nonexistent/net.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_data_gives_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.toml");
    fs::write(&cfg, ZERO).unwrap();
    let o = run_in(&dir.path().join("out"), &cfg, &["--solver", "both"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["utm_a.csv", "utm_b.csv", "fdm_a.csv", "fdm_b.csv"] {
        let csv = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 22);
        for row in rows {
            let q: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(q, 0.0, "{name}: {row}");
        }
    }
}

#[test]
fn utm_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run_in(d.path(), &config("semi_infinite_pair.toml"), &["--solver", "utm"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["utm_r1.csv", "utm_r2.csv", "diagnostics.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.path().join("utm_r1.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("rod_id,x,t,q,imag_residual"));
    let q = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap();
    assert_eq!(q.split('e').next().unwrap().len(), 18 + usize::from(q.starts_with('-')));
}

#[test]
fn seeded_self_check_is_recorded() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(out.path(), &config("insulated_rod.toml"), &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["self_check"]["seed"], 7);
    assert!(diag["self_check"]["max_gap"].as_f64().unwrap() < 1e-10);
    assert_eq!(diag["utm"]["mode"], "deformed");
}

#[test]
fn paper_mode_on_interior_points() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("insulated_rod.toml")).unwrap().replace("to = \"end\"", "to = \"end\"\nx = [0.25, 0.5, 0.75]");
    let cfg = dir.path().join("interior.toml");
    fs::write(&cfg, text).unwrap();
    let o = run_in(&dir.path().join("out"), &cfg, &["--mode", "paper"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out").join("utm_a.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let v: Vec<f64> = row.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        let exact = (-std::f64::consts::PI.powi(2) * v[1] / 4.0).exp() * (std::f64::consts::FRAC_PI_2 * v[0]).cos();
        assert!((v[2] - exact).abs() < 1e-6, "{row}");
    }
}
