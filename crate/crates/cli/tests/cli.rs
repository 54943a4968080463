//! End-to-end runs of the `penny` binary on small datasets.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn penny(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penny"))
        .args(args)
        .output()
        .expect("spawn penny")
}

fn ok(args: &[&str]) -> Output {
    let out = penny(args);
    assert!(
        out.status.success(),
        "penny {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails(args: &[&str]) -> String {
    let out = penny(args);
    assert!(!out.status.success(), "penny {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(!stderr.is_empty());
    stderr
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

fn small_dataset(dir: &Path, seed: &str) {
    ok(&["generate", "--seed", seed, "--n-traj", "3", "--t-end", "2", "--dt", "0.05", "--out", s(dir)]);
}

fn assert_all_finite(path: &Path, columns: usize) -> usize {
    let rows = lines(path);
    for row in &rows[1..] {
        let values: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(values.len(), columns, "{row}");
        assert!(values.iter().all(|v| v.is_finite()), "{row}");
    }
    rows.len() - 1
}

#[test]
fn default_generate_writes_32_trajectories_of_2001_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    ok(&["generate", "--seed", "11", "--out", s(&dir)]);
    for k in 0..32 {
        let rows = lines(&dir.join(format!("traj_{k:04}.csv")));
        assert_eq!(rows[0], "t,theta,phi,x,y,theta_dot,phi_dot,x_dot,y_dot");
        assert_eq!(rows.len(), 2002);
    }
    assert!(!dir.join("traj_0032.csv").exists());
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn generate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    small_dataset(&a, "5");
    small_dataset(&b, "5");
    small_dataset(&c, "6");
    for name in ["manifest.json", "traj_0000.csv", "traj_0002.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_ne!(fs::read(a.join("traj_0000.csv")).unwrap(), fs::read(c.join("traj_0000.csv")).unwrap());
}

#[test]
fn invalid_generate_settings_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let err = fails(&["generate", "--seed", "1", "--dt", "0", "--out", s(&out)]);
    assert!(err.contains("time step"), "{err}");
    fails(&["generate", "--seed", "1", "--dt", "-0.1", "--out", s(&out)]);
    let err = fails(&["generate", "--out", s(&out)]);
    assert!(err.contains("--seed"), "{err}");
    fails(&["generate", "--seed", "1"]);
    fails(&["generate", "--seed", "1", "--n-traj", "0", "--out", s(&out)]);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let data = tmp.path().join("data");
    fs::write(
        &cfg,
        format!("# small run\nseed = 3\nn-traj = 2\nt_end = 1\ndt = 0.1\nout = {}\n", s(&data)),
    )
    .unwrap();
    ok(&["generate", "--config", s(&cfg), "--n-traj", "4"]);
    let manifest = fs::read_to_string(data.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 3"));
    assert!(data.join("traj_0003.csv").exists());
    assert_eq!(lines(&data.join("traj_0000.csv")).len(), 12);

    fs::write(&cfg, "seed = 3\nbogus = 1\n").unwrap();
    let err = fails(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn train_smoke_run_writes_history_weights_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    small_dataset(&data, "2");
    ok(&["train", "--seed", "4", "--group", "s1r2", "--epochs", "10", "--data", s(&data), "--out", s(&run)]);
    let history = lines(&run.join("loss.csv"));
    assert_eq!(history[0], "epoch,loss");
    assert_eq!(history.len(), 11);
    assert!(history[10].starts_with("9,"));
    assert_all_finite(&run.join("loss.csv"), 2);
    assert!(fs::read_to_string(run.join("weights.txt")).unwrap().starts_with("format penny-mlp 1\n"));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["epochs"], 10);
    assert_eq!(metrics["group"], "s1r2");
    assert!(metrics["held_out"]["vertical_residual"].as_f64().unwrap().is_finite());
    assert!(metrics["held_out"]["max_section_angle"].as_f64().unwrap().is_finite());
    assert_eq!(metrics["held_out"]["mean_abs_components"].as_array().unwrap().len(), 3);
}

#[test]
fn generate_and_train_twice_give_identical_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let mut weights = Vec::new();
    for run in ["a", "b"] {
        let data = tmp.path().join(run).join("data");
        let out = tmp.path().join(run).join("model");
        small_dataset(&data, "8");
        ok(&["train", "--seed", "8", "--group", "se2", "--epochs", "15", "--data", s(&data), "--out", s(&out)]);
        weights.push(fs::read(out.join("weights.txt")).unwrap());
    }
    assert_eq!(weights[0], weights[1]);
}

#[test]
fn train_errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    small_dataset(&data, "1");
    let missing = tmp.path().join("missing");
    let err = fails(&["train", "--seed", "1", "--group", "se2", "--data", s(&missing), "--out", s(&out)]);
    assert!(err.contains("missing"), "{err}");
    fails(&["train", "--group", "se2", "--data", s(&data), "--out", s(&out)]);
    fails(&["train", "--seed", "1", "--group", "so3", "--data", s(&data), "--out", s(&out)]);
    fails(&["train", "--seed", "1", "--group", "se2", "--epochs", "0", "--data", s(&data), "--out", s(&out)]);
    let err = fails(&["train", "--seed", "1", "--group", "se2", "--lr", "1e308", "--epochs", "50", "--data", s(&data), "--out", s(&out)]);
    assert!(err.contains("diverged") || err.contains("norm"), "{err}");
}

#[test]
fn eval_writes_well_formed_outputs_for_both_groups() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, "3");
    for (group, grid_rows) in [("s1r2", 64), ("se2", 256)] {
        let model = tmp.path().join(format!("{group}-model"));
        let out = tmp.path().join(format!("{group}-eval"));
        ok(&["train", "--seed", "3", "--group", group, "--epochs", "1", "--data", s(&data), "--out", s(&model)]);
        let weights = model.join("weights.txt");
        ok(&["eval", "--group", group, "--weights", s(&weights), "--data", s(&data), "--out", s(&out)]);
        assert_eq!(lines(&out.join("field.csv"))[0], "theta,phi,x,y,f1,f2,f3,ref1,ref2,ref3");
        assert_eq!(lines(&out.join("lie_algebra.csv"))[0], "theta,phi,x,y,xi1,xi2,xi3,ref1,ref2,ref3");
        assert_eq!(assert_all_finite(&out.join("field.csv"), 10), grid_rows);
        assert_eq!(assert_all_finite(&out.join("lie_algebra.csv"), 10), grid_rows);
        assert_eq!(lines(&out.join("momentum_residual.csv"))[0], "t,value");
        // Interior samples of a 41-sample trajectory.
        assert_eq!(assert_all_finite(&out.join("momentum_residual.csv"), 2), 39);
        assert_eq!(assert_all_finite(&out.join("momentum_residual_exact.csv"), 2), 39);
        assert!(out.join("metrics.json").exists());
    }
}

#[test]
fn eval_on_a_single_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    small_dataset(&data, "4");
    ok(&["train", "--seed", "4", "--group", "se2", "--epochs", "1", "--data", s(&data), "--out", s(&model)]);
    let weights = model.join("weights.txt");
    for (group, flag) in [("se2", "--grid-side"), ("s1r2", "--grid-points")] {
        let out = tmp.path().join(group);
        ok(&["eval", "--group", group, "--weights", s(&weights), flag, "1", "--t-end", "1", "--out", s(&out)]);
        assert_eq!(assert_all_finite(&out.join("field.csv"), 10), 1);
        assert_eq!(assert_all_finite(&out.join("lie_algebra.csv"), 10), 1);
        assert_eq!(assert_all_finite(&out.join("momentum_residual.csv"), 2), 99);
    }
    // At the origin the SE(2) pullback is the identity.
    let se2 = lines(&tmp.path().join("se2").join("lie_algebra.csv"));
    let field = lines(&tmp.path().join("se2").join("field.csv"));
    let xi: Vec<&str> = se2[1].split(',').collect();
    let f: Vec<&str> = field[1].split(',').collect();
    assert_eq!(xi[4..7], f[4..7]);
}

#[test]
fn eval_rejects_malformed_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.txt");
    let out = tmp.path().join("out");
    fs::write(&bad, "format penny-mlp 1\ndims 4 10 3\nlayer 0 weights 10 4\n1 2 3\n").unwrap();
    fails(&["eval", "--group", "se2", "--weights", s(&bad), "--out", s(&out)]);
    fails(&["eval", "--group", "se2", "--weights", s(&tmp.path().join("none.txt")), "--out", s(&out)]);
}
