//! End-to-end CLI behavior: error reporting and pipeline stage handling.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_greenwalk")
}

fn root() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../..")
}

#[test]
fn missing_model_file_reports_path() {
    let dir = std::env::temp_dir().join("gw_missing_model");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "model = /nonexistent/path.model\nstep_dist = uniform\n").unwrap();
    let out = Command::new(bin())
        .args(["pipeline", "run", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("/nonexistent/path.model"),
        "stderr should name the missing file: {err}"
    );
}

#[test]
fn config_parse_errors_carry_line_numbers() {
    let dir = std::env::temp_dir().join("gw_bad_cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "model = builtin:f2\nsteps = banana\n").unwrap();
    let out = Command::new(bin())
        .args(["walk", "stats", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":2:"), "stderr should carry the line number: {err}");
}

#[test]
fn pipeline_skips_confinement_off_free_groups() {
    let out_dir = "out/z2z3_behavior";
    let status = Command::new(bin())
        .current_dir(root())
        .args([
            "pipeline",
            "run",
            "--config",
            "crates/cli/fixtures/configs/z2z3_uniform.cfg",
            "--out",
            out_dir,
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = std::fs::read_to_string(format!("{}/{}/manifest.txt", root(), out_dir)).unwrap();
    assert!(manifest.contains("stage confine skipped"), "manifest: {manifest}");
    assert!(manifest.contains("stage thermo ok"));
}

#[test]
fn generic_pipeline_runs_supported_stages() {
    // Rewriting model + automaton file: Green comes from the truncated
    // ball, thermo from finite-horizon cylinders; stages that need exact
    // first-passage values fail individually without stopping the rest.
    let out_dir = "out/z2z3_rules_behavior";
    let output = Command::new(bin())
        .current_dir(root())
        .args([
            "pipeline",
            "run",
            "--config",
            "crates/cli/fixtures/configs/z2z3_rules.cfg",
            "--out",
            out_dir,
        ])
        .output()
        .unwrap();
    // Some stages fail by design; that is the partial-failure exit code.
    assert_eq!(output.status.code(), Some(3));
    let manifest = std::fs::read_to_string(format!("{}/{}/manifest.txt", root(), out_dir)).unwrap();
    assert!(manifest.contains("stage validate ok"));
    assert!(manifest.contains("stage green ok"));
    assert!(manifest.contains("stage thermo ok"));
    assert!(manifest.contains("stage hitting ok"));
    assert!(manifest.contains("stage walk failed"));
    // Partial outputs are preserved.
    let thermo =
        std::fs::read_to_string(format!("{}/{}/thermo_summary.json", root(), out_dir)).unwrap();
    assert!(thermo.contains("cylinder_convergence"));
}

#[test]
fn validate_exit_code_on_defect() {
    // A hand-written automaton missing edges must fail validation with a
    // distinct exit code.
    let dir = std::env::temp_dir().join("gw_defect");
    std::fs::create_dir_all(&dir).unwrap();
    let aut = dir.join("defect.aut");
    std::fs::write(&aut, "initial q0\nq0 a qa\nqa a qa\nqa b qb\nqb b qb\n").unwrap();
    let cfg = dir.join("cfg.cfg");
    std::fs::write(
        &cfg,
        format!(
            "model = builtin:f2\nstep_dist = uniform\nautomaton = {}\noutput_dir = {}\n",
            aut.display(),
            dir.join("out").display()
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["automaton", "validate", "--config", cfg.to_str().unwrap(), "--depth", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "expected validation-failure exit code");
}
