//! End-to-end checks of the binary: exit codes, artifact listing, and the
//! byte-reproducibility contract for reports.

use std::path::Path;
use std::process::Command;

fn mflab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mflab"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

const MODEL: &str = r#""model": {
    "dimension": 1,
    "confinement": {"type": "quadratic", "params": {"a": 0.5}},
    "kernels": [{"order": 2, "type": "quadratic_pair", "params": {"lambda": 0.5}}]
}"#;

fn read_report(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn strip_meta(mut v: serde_json::Value) -> serde_json::Value {
    v.as_object_mut().unwrap().remove("meta");
    v
}

#[test]
fn check_subcommand_reports_assumptions() {
    let tmp = std::env::temp_dir().join("mflab_cli_check");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("config.json");
    write(
        &cfg,
        &format!(
            r#"{{ {MODEL}, "experiment": {{"probe_box": [[-4.0, 4.0]], "n_probes": 300, "seed": 3}} }}"#
        ),
    );
    let out = tmp.join("out");
    let status = mflab()
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_report(&out);
    assert_eq!(report["subcommand"], "check");
    let entries = report["results"]["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| e["name"] == "H2"));
    assert!(entries.iter().any(|e| e["name"] == "VFP2"));
}

#[test]
fn reports_are_reproducible_and_protected() {
    let tmp = std::env::temp_dir().join("mflab_cli_repro");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("config.json");
    write(
        &cfg,
        &format!(
            r#"{{ {MODEL},
  "grid": {{"lo": -8.0, "hi": 8.0, "m": 161}},
  "sim": {{"dt": 0.002, "horizon": 1.0, "n": 1, "replicas": 1, "record_every": 1}},
  "experiment": {{"initial": {{"type": "gaussian", "mean": 1.0, "sd": 1.0}}, "record_every": 50}} }}"#
        ),
    );
    let (a, b) = (tmp.join("a"), tmp.join("b"));
    for out in [&a, &b] {
        let status = mflab()
            .args(["pde", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        strip_meta(read_report(&a)),
        strip_meta(read_report(&b)),
        "reports must be identical outside the meta block"
    );
    assert_eq!(
        std::fs::read(a.join("flow.csv")).unwrap(),
        std::fs::read(b.join("flow.csv")).unwrap()
    );
    // artifacts listed
    let report = read_report(&a);
    assert!(report["artifacts"]
        .as_array()
        .unwrap()
        .contains(&serde_json::json!("flow.csv")));
    // existing report refuses overwrite without --force
    let code = mflab()
        .args(["pde", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
    let status = mflab()
        .args(["pde", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .arg("--force")
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn config_errors_exit_2() {
    let tmp = std::env::temp_dir().join("mflab_cli_badcfg");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("config.json");
    write(&cfg, r#"{"model": {"dimension": 0}}"#);
    let code = mflab()
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.join("out"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
}

#[test]
fn stability_refusal_exits_3_with_diagnostic() {
    let tmp = std::env::temp_dir().join("mflab_cli_stab");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("config.json");
    // dt far above the admissible explicit step
    write(
        &cfg,
        &format!(
            r#"{{ {MODEL},
  "grid": {{"lo": -8.0, "hi": 8.0, "m": 161}},
  "sim": {{"dt": 0.5, "horizon": 2.0, "n": 1, "replicas": 1, "record_every": 1}},
  "experiment": {{"initial": {{"type": "gaussian", "mean": 1.0, "sd": 1.0}}}} }}"#
        ),
    );
    let out = tmp.join("out");
    let code = mflab()
        .args(["pde", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));
    let report = read_report(&out);
    assert_eq!(report["error"]["kind"], "stability");
}

#[test]
fn failed_gate_exits_4_under_assert() {
    let tmp = std::env::temp_dir().join("mflab_cli_gate");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("config.json");
    // tiny particle budget: the sweep fits are pure noise, r^2 < 0.95
    write(
        &cfg,
        &format!(
            r#"{{ {MODEL},
  "grid": {{"lo": -8.0, "hi": 8.0, "m": 161}},
  "sim": {{"dt": 0.005, "horizon": 6.0, "n": 1, "replicas": 1, "record_every": 25, "master_seed": 9}},
  "experiment": {{"ns": [8, 16], "particle_budget": 64, "fit_window": [2.0, 5.0], "smooth_window": 1.0, "mean_shift": 0.05}} }}"#
        ),
    );
    let out = tmp.join("out");
    let output = mflab()
        .args(["uniformity", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--assert")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{}", String::from_utf8_lossy(&output.stderr));
    // without --assert the same run reports the failures but exits 0
    let status = mflab()
        .args(["uniformity", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--force")
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_report(&out);
    assert!(!report["gates"]["failures"].as_array().unwrap().is_empty());
}
