use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "seed = 2\n[grid]\nnx = 8\nny = 8\n[time]\nT = 0.02\ndt = 5e-3\n[control]\ninitial = \"lid\"\n[targets]\npreset = \"pattern\"\n";

fn chns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chns"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(cfg: &Path, out: &Path, sub: &[&str]) -> Output {
    let mut args = vec![
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(sub);
    chns(&args)
}

#[test]
fn simulate_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("sim");
    let o = run(&cfg, &out, &["simulate"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "diagnostics.csv",
        "u_final.txt",
        "phi_final.txt",
        "control.txt",
        "manifest.toml",
        "snapshots/phi_00000.txt",
        "snapshots/phi_00004.txt",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("subcommand = \"simulate\""));
    assert!(manifest.contains("config_digest"));
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[optimizer]\nmax_iters = 2\n"));
    let out = dir.path().join("o");
    for sub in [
        &["linearize"][..],
        &["adjoint"],
        &["optimize"],
        &["verify", "duality"],
        &["verify", "gradcheck"],
    ] {
        let o = run(&cfg, &out, sub);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{sub:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    for f in [
        "linearized.csv",
        "adjoint.csv",
        "multipliers.csv",
        "gradient.txt",
        "history.csv",
        "h_final.txt",
        "duality.csv",
        "gradcheck.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let o = chns(&["--quiet", "--out", out.to_str().unwrap(), "plot"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("cost_history.svg").exists());
    assert!(out.join("gradcheck.svg").exists());
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[time]\nT = 1.0\ndt = 0.3\n[physics]\nnu = 0.0\n",
    );
    let o = run(&cfg, &dir.path().join("x"), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("dt must divide") && err.contains("physics.nu"),
        "{err}"
    );
}

#[test]
fn missed_threshold_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL}[verify]\norder_min = 5.0\norder_max = 6.0\n"),
    );
    let out = dir.path().join("t");
    let o = run(&cfg, &out, &["verify", "taylor"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(fs::read_to_string(out.join("manifest.toml"))
        .unwrap()
        .contains("outcome = \"fail\""));
}

#[test]
fn plot_of_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = chns(&["--out", dir.path().to_str().unwrap(), "plot"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing input"));
}

#[test]
fn simulate_then_plot_gives_energy_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("s");
    assert_eq!(run(&cfg, &out, &["simulate"]).status.code(), Some(0));
    assert_eq!(
        chns(&["--quiet", "--out", out.to_str().unwrap(), "plot"])
            .status
            .code(),
        Some(0)
    );
    assert!(out.join("energy.svg").exists());
    assert!(out.join("frames/phi_00000.png").exists());
}

#[test]
fn shipped_presets_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for name in ["rest", "lid", "spinodal", "inverse_crime"] {
        chns::config::load_config(&root.join(format!("{name}.toml")))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
