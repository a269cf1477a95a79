//! End-to-end checks of the command line: exit codes, clause-named
//! diagnostics, and the file outputs of each subcommand.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_porofrac"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("porofrac-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn coarse_config(dir: &PathBuf) -> PathBuf {
    let path = dir.join("cfg.json");
    let status = bin()
        .args(["example", "--config", path.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["discretization"] = serde_json::json!({"h": 0.25, "dt": 0.1, "t_end": 0.2});
    cfg["eps_list"] = serde_json::json!([0.5, 0.25]);
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn sweep_writes_report_and_verdicts() {
    let dir = workdir("sweep");
    let cfg = coarse_config(&dir);
    let out = dir.join("out");
    let output = bin()
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("epsilon,norm_name,value"));
    assert!(out.join("verdicts.txt").exists());
    assert!(out.join("config_echo.json").exists());
}

#[test]
fn invalid_exponent_exits_one_with_clause() {
    let dir = workdir("clause");
    let cfg = coarse_config(&dir);
    let text = std::fs::read_to_string(&cfg).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["exponents"]["nu_omega"] = serde_json::json!("-2");
    std::fs::write(&cfg, serde_json::to_string(&v).unwrap()).unwrap();
    let out = dir.join("out");
    let output = bin()
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("3.5(i)"), "{stderr}");
}

#[test]
fn solve_full_dumps_levels_and_manifest() {
    let dir = workdir("full");
    let cfg = coarse_config(&dir);
    let out = dir.join("out");
    let output = bin()
        .args([
            "solve-full",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let manifest = std::fs::read_to_string(out.join("full_manifest.csv")).unwrap();
    assert!(manifest.contains("full_0000.csv"));
    assert!(manifest.contains("config_hash"));
    let level0 = std::fs::read_to_string(out.join("full_0000.csv")).unwrap();
    assert!(level0.starts_with("vertex,subdomain,x,y,p,u_x,u_y"));
}

#[test]
fn solve_limit_and_effective_outputs() {
    let dir = workdir("limit");
    let cfg = coarse_config(&dir);
    let out = dir.join("out");
    let output = bin()
        .args([
            "solve-limit",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    assert!(out.join("limit_manifest.csv").exists());
    let manifest = std::fs::read_to_string(out.join("limit_manifest.csv")).unwrap();
    assert!(manifest.contains("limit"));

    let output = bin()
        .args([
            "effective",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let eff = std::fs::read_to_string(out.join("effective.csv")).unwrap();
    assert!(eff.starts_with("y,c_gamma_n_00"));
}

#[test]
fn mesh_dump_and_unknown_subcommand() {
    let dir = workdir("mesh");
    let cfg = coarse_config(&dir);
    let out = dir.join("out");
    let output = bin()
        .args([
            "mesh-dump",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let mesh = std::fs::read_to_string(out.join("mesh.txt")).unwrap();
    assert!(mesh.contains("# vertices"));
    assert!(mesh.contains("gamma_plus_side"));

    let output = bin()
        .args(["frobnicate", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}
