//! Exercise the binary end to end: subcommands, exit codes, output files.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sg-manifold"))
}

const SMALL_CONFIG: &str = r#"
[grids]
xi_min = -6.0
xi_max = 6.0
xi_n = 49
x_min = -9.0
x_max = 9.0
x_n = 73

[stencil]
u_star = 0.1
nu = 5

[cutoff]
xi_cap = 1.0

[series]
order = 4

[forcing]
family = "poly"

[[forcing.terms]]
order = 2
profile = "gaussian"
amplitude = 1.0
x0 = 0.0
sigma = 1.2

[[forcing.terms]]
order = 3
profile = "sech2"
amplitude = 0.6

[dynamics]
pde_refine = 2
"#;

fn build_small(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = dir.join("out");
    let status = bin()
        .args(["build", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "build failed");
    out
}

#[test]
fn build_then_probe_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_small(dir.path());
    let model = out.join("model");
    assert!(model.join("manifest.json").exists());
    assert!(out.join("build_report.json").exists());
    let report = std::fs::read_to_string(out.join("build_report.json")).unwrap();
    assert!(report.contains("config_sha256"));
    assert!(report.contains("model_manifest_sha256"));

    // residual sweep
    let status = bin()
        .args(["residual-sweep", "--model"])
        .arg(&model)
        .args(["--eps", "0.03,0.05,0.08", "--order", "2,3"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("residual_sweep.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256 = "));
    assert!(csv.contains("order,eps,znorm,floor,corrected"));
    assert!(out.join("residual_sweep.svg").exists());

    // simulate with snapshots
    let status = bin()
        .args(["simulate", "--model"])
        .arg(&model)
        .args(["--eps", "0.05", "--t-end", "5", "--snapshots", "2"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("trajectory.csv").exists());
    assert!(out.join("snapshot1.csv").exists());

    // verify
    let status = bin()
        .args(["verify", "--model"])
        .arg(&model)
        .args(["--eps", "0.05", "--t-end", "4"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let verdict = std::fs::read_to_string(out.join("verify_verdict.json")).unwrap();
    assert!(verdict.contains("sup_deviation"));
    assert!(verdict.contains("floor"));

    // bounds-check (model order 4 suffices)
    let status = bin()
        .args(["bounds-check", "--model"])
        .arg(&model)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("bounds_report.json").exists());

    // rescaled-check
    let status = bin()
        .args(["rescaled-check", "--model"])
        .arg(&model)
        .args(["--eps", "0.08,0.04", "--s-end", "2"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("rescaled_report.json").exists());
}

#[test]
fn malformed_config_names_key_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grids]\nxi_count = 10\n").unwrap();
    let outp = bin()
        .args(["build", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(outp.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&outp.stderr);
    assert!(stderr.contains("xi_count"), "stderr: {stderr}");
}

#[test]
fn out_of_plateau_verify_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_small(dir.path());
    let outp = bin()
        .args(["verify", "--model"])
        .arg(out.join("model"))
        .args(["--eps", "0.05", "--xi0", "5.0"])
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(outp.status.code(), Some(2));
}

#[test]
fn order_out_of_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_small(dir.path());
    let outp = bin()
        .args(["residual-sweep", "--model"])
        .arg(out.join("model"))
        .args(["--eps", "0.05", "--order", "9"])
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(outp.status.code(), Some(2));
}

#[test]
fn missing_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let outp = bin()
        .args(["bounds-check", "--model"])
        .arg(dir.path().join("nope"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(outp.status.code(), Some(2));
}

#[test]
fn zero_forcing_build_reports_classical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.toml");
    std::fs::write(
        &cfg,
        r#"
[grids]
xi_min = -6.0
xi_max = 6.0
xi_n = 49
x_min = -9.0
x_max = 9.0
x_n = 73

[stencil]
u_star = 0.1
nu = 5

[cutoff]
xi_cap = 1.0

[series]
order = 2

[forcing]
family = "zero"
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let outp = bin()
        .args(["build", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(outp.status.success());
    let report = std::fs::read_to_string(out.join("build_report.json")).unwrap();
    assert!(report.contains("\"classical_manifold\": true"));
}
