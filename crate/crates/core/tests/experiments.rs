use std::fs;

use homog_core::evolution::read_snapshot;
use homog_core::experiment::{run, ExperimentConfig};

const BASE: &str = r#"
kind = "KIND"

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
eps = [0.5, 0.4, 0.3, 0.25]
realizations = 100
seed = 4
"#;

fn config(kind: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&BASE.replace("KIND", kind)).unwrap()
}

#[test]
fn converge_run_writes_rate_table() {
    let tmp = tempfile::tempdir().unwrap();
    let setup = config("converge").validate().unwrap();
    let out = run(&setup, &tmp.path().join("c"), Some(2)).unwrap();
    let rows = fs::read_to_string(tmp.path().join("c/converge.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(out.summary["results"]["fitted_slope"].is_f64());
    assert_eq!(out.summary["results"]["theory_slope"], 0.2);
}

#[test]
fn fluctuate_run_reports_limit_and_scaling() {
    let tmp = tempfile::tempdir().unwrap();
    let setup = config("fluctuate").validate().unwrap();
    let out = run(&setup, &tmp.path().join("f"), None).unwrap();
    let res = &out.summary["results"];
    assert!(res["limit_variance"].as_f64().unwrap() > 0.0);
    assert!(res["scaling_max_z"].as_f64().unwrap() >= 0.0);
    assert_eq!(res["rows"].as_array().unwrap().len(), 4);
    let header = fs::read_to_string(tmp.path().join("f/stats.csv")).unwrap();
    assert!(header.starts_with("eps,n_samples,mean,var,se,skew,kurt,ks_p\n"));
}

#[test]
fn graphs_run_compares_oracles() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("graphs");
    cfg.ensemble.eps = vec![1.0];
    cfg.graphs.nbar_max = 4;
    let out = run(&cfg.validate().unwrap(), &tmp.path().join("g"), None).unwrap();
    let oracle = &out.summary["results"]["oracle"];
    assert!(oracle["simple_2_0"]["z"].as_f64().unwrap().abs() < 4.0);
    assert!(oracle["crossing_1_1"]["z"].as_f64().unwrap().abs() < 4.0);
    let census = fs::read_to_string(tmp.path().join("g/census.csv")).unwrap();
    assert_eq!(census.lines().count(), 1 + 3 + 5 + 7 + 9);
}

#[test]
fn longrange_run_matches_kernel_form() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
kind = "longrange"

[grid]
dim = 2
points = 64
length = 16.0

[spectrum]
kind = "long_range"
exponent = 0.5

[spectrum.base]
kind = "gaussian"
amplitude = 1.0
width = 2.0

[evolution]
m = 1.0
t_final = 0.5
dt = 0.05
script_m_steps = 16

[test]
amplitude = 1.0
width = 1.5
"#;
    let setup = ExperimentConfig::from_toml_str(text)
        .unwrap()
        .validate()
        .unwrap();
    let out = run(&setup, &tmp.path().join("l"), None).unwrap();
    let res = &out.summary["results"];
    assert!(res["relative_gap"].as_f64().unwrap() < 0.01);
    let h = res["hurst"].as_f64().unwrap();
    assert!(h > 0.0 && h < 1.0);
}

#[test]
fn long_range_requires_d_above_m_plus_n() {
    let mut cfg = config("longrange");
    cfg.spectrum =
        homog_core::PowerSpectrum::long_range(0.7, homog_core::PowerSpectrum::gaussian(1.0, 1.0));
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("d > m + n"), "{err}");
}

#[test]
fn simulate_snapshots_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("simulate");
    cfg.output.snapshot_times = vec![0.5];
    let dir = tmp.path().join("s");
    run(&cfg.validate().unwrap(), &dir, Some(1)).unwrap();
    let snap = read_snapshot(&dir.join("snapshots"), "eps0_t0").unwrap();
    assert_eq!(snap.field.values().len(), 64);
    assert!((snap.time - 0.5).abs() < 1e-12);
}
