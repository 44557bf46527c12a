use std::path::Path;
use std::process::{Command, Output};

fn beamsketch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamsketch"))
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    let json = r#"{
        "name": "small",
        "scenario": "constant_range",
        "array": { "kind": "linear", "counts": [16] },
        "excitation": { "lambda_min": 0.075, "lambda_max": 0.15, "k": 4, "spacing_rule": "uniform_in_frequency" },
        "scene": { "grid": [16], "range_m": 20.0 },
        "sweep": { "codes": [8, 4] },
        "seed": 5
    }"#;
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn experiment_writes_manifest_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = beamsketch(&[
            "experiment",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ma = std::fs::read(a.join("manifest.json")).unwrap();
    let mb = std::fs::read(b.join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(
        std::fs::read(a.join("table.csv")).unwrap(),
        std::fs::read(b.join("table.csv")).unwrap()
    );
    assert!(a.join("x_codes_8.pgm").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let o = beamsketch(&[
        "experiment",
        "--config",
        &cfg,
        "--seed",
        "99",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
    assert!(!out.join("x_codes_8.pgm").exists());
}

#[test]
fn simulate_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sim = dir.path().join("sim");
    let rec = dir.path().join("rec");
    assert!(
        beamsketch(&["simulate", "--config", &cfg, "--out", sim.to_str().unwrap()])
            .status
            .success()
    );
    let o = beamsketch(&[
        "reconstruct",
        "--operator",
        sim.join("operator.bin").to_str().unwrap(),
        "--measurements",
        sim.join("measurements.json").to_str().unwrap(),
        "--codes",
        "8",
        "--out",
        rec.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let truth = beamsketch::io::read_real_csv(&sim.join("truth.csv")).unwrap();
    let x = beamsketch::io::read_real_csv(&rec.join("x.csv")).unwrap();
    assert!(beamsketch::harness::relative_error(&truth, &x).unwrap() < 1e-10);
}

#[test]
fn checks_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = beamsketch(&["check", "thm1", "--config", &cfg, "--codes", "16"]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["verdict"], "pass");
    let o = beamsketch(&["check", "nested", "--config", &cfg]);
    assert!(o.status.success());
    let o = beamsketch(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("s/spectrum.csv").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let o = beamsketch(&["experiment", "--out", "/nonexistent/never"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config or --preset"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name":"x","scenario":"constant_range","array":{"kind":"linear","counts":[2000]},"excitation":{"lambda_min":0.075,"lambda_max":0.15,"k":2},"scene":{"grid":[16],"range_m":20.0},"sweep":{"codes":[4]}}"#).unwrap();
    let o = beamsketch(&[
        "experiment",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}
