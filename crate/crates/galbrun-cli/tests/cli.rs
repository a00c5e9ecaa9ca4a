use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_galbrun"))
}

fn write_config(name: &str, body: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn mesh_info_reports_counts() {
    let out = bin().args(["mesh-info", "--n", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("vertices = 8"));
    assert!(text.contains("tets = 6"));
    assert!(text.contains("boundary_faces = 12"));
    assert!(text.contains("interior_faces = 6"));
}

#[test]
fn mesh_dump_writes_sections() {
    let dump = std::env::temp_dir().join("galbrun_cli_mesh.txt");
    let out = bin()
        .args(["mesh-info", "--n", "1", "--dump", dump.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("vertices 8"));
    assert!(text.contains("tets 6"));
    assert!(text.contains("faces 18"));
    std::fs::remove_file(dump).ok();
}

/// Mach gate: a violating preset warns by default (exit 0) and refuses with
/// exit code 2 under --strict-mach.
#[test]
fn mach_gate_exit_codes() {
    let cfg = write_config("galbrun_cli_fast.cfg", "preset = convective-fast\n");
    let out = bin()
        .args(["check-params", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("warning"), "expected a warning: {stderr}");

    let out = bin()
        .args(["check-params", "--config", cfg.to_str().unwrap(), "--strict-mach"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "strict mode must exit with code 2");

    // the solve path refuses through the assembly gate as well
    let cfg2 = write_config(
        "galbrun_cli_fast_conv.cfg",
        "preset = convective-fast\nlevels = 1, 2\n",
    );
    let out = bin()
        .args(["convergence", "--config", cfg2.to_str().unwrap(), "--strict-mach"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(cfg).ok();
    std::fs::remove_file(cfg2).ok();
}

#[test]
fn convergence_emits_csv_and_json() {
    let report = std::env::temp_dir().join("galbrun_cli_table.json");
    let cfg = write_config(
        "galbrun_cli_conv.cfg",
        "preset = constant\nmms = sine\nk = 1\nl = 1\nlevels = 1, 2\n",
    );
    let out = bin()
        .args(["convergence", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("level,h_max,ndof,dn_error,seconds"));
    assert!(text.lines().count() >= 3);

    let out = bin()
        .args([
            "convergence",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "json",
            "--out",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json = std::fs::read_to_string(&report).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["mach"]["satisfied"].as_bool().unwrap());
    std::fs::remove_file(report).ok();
    std::fs::remove_file(cfg).ok();
}

#[test]
fn solve_and_infsup_run() {
    let out = bin().args(["solve", "--n", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("level,h_max,ndof,dn_error,seconds"));

    let out = bin().args(["infsup", "--n", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sigma_min ="));
}

#[test]
fn unknown_preset_exits_one() {
    let cfg = write_config("galbrun_cli_bad.cfg", "preset = warp-drive\n");
    let out = bin()
        .args(["check-params", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_file(cfg).ok();
}
