use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const SIMULATE: &str = r#"
kind = "simulate"

[grid]
dim = 1
points = 64
length = 8.0

[spectrum]
kind = "gaussian"
amplitude = 0.05
width = 2.0

[evolution]
m = 0.4
t_final = 0.5
dt = 0.05

[ensemble]
eps = [0.5, 0.25]
realizations = 120
seed = 11

[output]
snapshot_times = [0.25, 0.5]
"#;

fn homog() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homog"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_into(config: &Path, out: &Path, workers: &str) -> std::process::Output {
    homog()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", workers])
        .output()
        .unwrap()
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIMULATE);
    let a = run_into(&cfg, &tmp.path().join("a"), "1");
    let b = run_into(&cfg, &tmp.path().join("b"), "3");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    for f in ["summary.json", "stats.csv", "snapshots/eps1_t0.f64"] {
        let x = fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert!(summary["theory"]["rho"].as_f64().unwrap() > 0.0);
    let header = fs::read_to_string(tmp.path().join("a/stats.csv")).unwrap();
    assert!(header.starts_with("eps,n_samples,mean,var,se,skew,kurt,ks_p"));
    assert!(tmp.path().join("a/timing.json").exists());
}

#[test]
fn seed_override_changes_results_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIMULATE);
    assert!(run_into(&cfg, &tmp.path().join("a"), "1").status.success());
    let out = homog()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("b"))
        .args(["--seed", "12"])
        .env("HOMOG_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |d: &str| -> Value {
        serde_json::from_str(&fs::read_to_string(tmp.path().join(d).join("summary.json")).unwrap())
            .unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_ne!(a["results"], b["results"]);
    assert_eq!(a["theory"], b["theory"]);
    let timing: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("b/timing.json")).unwrap())
            .unwrap();
    assert_eq!(timing["workers"], 2);
}

#[test]
fn horizon_violation_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SIMULATE.replace("t_final = 0.5", "t_final = 500.0"),
    );
    let out = run_into(&cfg, &tmp.path().join("a"), "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 rho_f T < 1 violated"));
    assert!(!tmp.path().join("a").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SIMULATE.replace("seed = 11", "seed = 11\nsed = 3"),
    );
    let out = homog()
        .args(["validate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn existing_results_are_never_overwritten() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIMULATE);
    let dir = tmp.path().join("a");
    assert!(run_into(&cfg, &dir, "1").status.success());
    let again = run_into(&cfg, &dir, "1");
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn rho_run_reports_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SIMULATE.replace("kind = \"simulate\"", "kind = \"rho\"");
    let cfg = write_config(tmp.path(), &text);
    assert!(run_into(&cfg, &tmp.path().join("r"), "1").status.success());
    let s: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("r/summary.json")).unwrap())
            .unwrap();
    for key in ["rho", "rho_f", "t_max", "beta_exponent", "alpha_exponent"] {
        assert!(!s["theory"][key].is_null(), "missing {key}");
    }
    assert_eq!(s["theory"]["scales"].as_array().unwrap().len(), 2);
}

#[test]
fn census_prints_counts() {
    let out = homog()
        .args(["census", "--nbar-max", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "nbar,n,m,total,crossing,simple,crossing_simple"
    );
    let expected = [1u64, 3, 15, 105, 945];
    let mut rows = 0;
    for line in lines {
        let cols: Vec<u64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[0] as usize * 2, (cols[1] + cols[2]) as usize);
        assert_eq!(cols[3], expected[cols[0] as usize - 1]);
        rows += 1;
    }
    assert_eq!(rows, (1..=5).map(|n| 2 * n + 1).sum::<usize>());
    let too_big = homog()
        .args(["census", "--nbar-max", "9"])
        .output()
        .unwrap();
    assert!(!too_big.status.success());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = homog()
            .args(["validate", "--config"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
        seen += 1;
    }
    assert_eq!(seen, 5);
}
