use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn write(dir: &Path, name: &str, v: serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn lstar(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lstar"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn cmsv_config() -> serde_json::Value {
    json!({
        "kind": "cmsv",
        "ensemble": {"kind": "rademacher", "n1": 2, "n2": 3, "m": 5},
        "tau": 1.5,
        "trials": 2,
        "starts": 2
    })
}

#[test]
fn writes_both_formats_with_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", cmsv_config());
    let out = tmp.path().join("out");
    let o = lstar(&["cmsv", "--seed", "5", "--jobs", "1"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("cmsv.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("trial,seed,m,tau,rho_min,rho_max"));
    assert!(header.ends_with("config_hash,version"));
    assert_eq!(csv.lines().count(), 3);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("cmsv.json")).unwrap()).unwrap();
    assert_eq!(doc["config"]["seed"], 5);
    assert_eq!(doc["version"], lstar::VERSION);
    assert!(csv.contains(doc["config_hash"].as_str().unwrap()));
}

#[test]
fn format_flag_selects_one_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", cmsv_config());
    let out = tmp.path().join("out");
    let o = lstar(&["cmsv", "--format", "csv", "--trials", "1"], &cfg, &out);
    assert!(o.status.success());
    let names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["cmsv.csv"]);
    assert_eq!(std::fs::read_to_string(out.join("cmsv.csv")).unwrap().lines().count(), 2);
}

#[test]
fn job_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", cmsv_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(lstar(&["cmsv", "--jobs", "1"], &cfg, &a).status.success());
    assert!(lstar(&["cmsv", "--jobs", "3"], &cfg, &b).status.success());
    for f in ["cmsv.csv", "cmsv.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = write(tmp.path(), "bad.json", json!({"kind": "cmsv"}));
    assert_eq!(lstar(&["cmsv"], &bad, &out).status.code(), Some(2));
    let cfg = write(tmp.path(), "c.json", cmsv_config());
    // Wrong subcommand for the config.
    assert_eq!(lstar(&["recover"], &cfg, &out).status.code(), Some(2));
    assert_eq!(lstar(&["cmsv", "--trials", "0"], &cfg, &out).status.code(), Some(2));
    let o = lstar(&["cmsv", "--jobs", "0"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn io_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(lstar(&["cmsv"], &tmp.path().join("missing.json"), &out).status.code(), Some(4));
    let cfg = write(tmp.path(), "c.json", cmsv_config());
    // The output path is an existing file.
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(lstar(&["cmsv"], &cfg, &blocker).status.code(), Some(4));
}

#[test]
fn nonconvergence_exits_3_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "r.json",
        json!({
            "kind": "recover",
            "ensemble": {"kind": "gaussian", "n1": 4, "n2": 4, "m": 10},
            "algorithm": {"algorithm": "mbp", "epsilon": 0.0},
            "estimate_rho": false,
            "solver": {"max_iters": 2},
            "trials": 2
        }),
    );
    let out = tmp.path().join("out");
    let o = lstar(&["recover"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(out.join("recover.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains(",false,"));
}

#[test]
fn noise_calibration_doubles_with_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for sigma in [0.25, 0.5] {
        let cfg = write(
            tmp.path(),
            "n.json",
            json!({
                "kind": "noise-calibration",
                "ensemble": {"kind": "gaussian", "n1": 3, "n2": 4, "m": 12, "normalize": true},
                "noise": {"kind": "gaussian", "sigma": sigma},
                "trials": 100
            }),
        );
        let out = tmp.path().join(format!("o{sigma}"));
        assert!(lstar(&["noise-cal", "--format", "json"], &cfg, &out).status.success());
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("noise_calibration.json")).unwrap()).unwrap();
        rows.push(doc["records"][0].clone());
    }
    for q in ["q50", "q95", "lambda", "mu"] {
        assert_eq!(rows[1][q].as_f64().unwrap(), 2.0 * rows[0][q].as_f64().unwrap(), "{q}");
    }
    assert!(rows[0]["holdout_feasible_fraction"].as_f64().unwrap() >= 0.9);
}
