use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use penny_core::diagnostics::momentum_equation_residual;
use penny_core::dynamics::{generate_dataset, DEFAULT_CENTER_SPREAD};
use penny_core::evaluation::{
    field_metrics, held_out_grid, phi_grid, xy_grid, FieldMetrics, PHI_GRID_POINTS, XY_GRID_HALF_WIDTH,
    XY_GRID_SIDE,
};
use penny_core::io::{fmt_f64, fmt_row, load_weights, read_dataset, read_manifest, save_weights, write_dataset};
use penny_core::learner::{forward, train as fit, BatchMode, ModelWeights, TrainConfig, TrainReport};
use penny_core::{
    Config, DatasetConfig, GroupAction, LieAlgebraElement, PennyParams, Trajectory, TrajectoryParams, UniformRange,
};
use serde_json::json;

use crate::settings::RunFile;
use crate::{EvalArgs, GenerateArgs, PennyArgs, SamplingArgs, TrainArgs};

pub const WEIGHTS_FILE: &str = "weights.txt";
pub const LOSS_FILE: &str = "loss.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const FIELD_FILE: &str = "field.csv";
pub const LIE_ALGEBRA_FILE: &str = "lie_algebra.csv";
pub const RESIDUAL_FILE: &str = "momentum_residual.csv";
pub const EXACT_RESIDUAL_FILE: &str = "momentum_residual_exact.csv";

fn penny(file: &RunFile, args: PennyArgs) -> Result<PennyParams> {
    let d = PennyParams::default();
    Ok(PennyParams::new(
        file.pick_or(args.mass, "mass", d.mass)?,
        file.pick_or(args.spin_inertia, "spin_inertia", d.spin_inertia)?,
        file.pick_or(args.yaw_inertia, "yaw_inertia", d.yaw_inertia)?,
        file.pick_or(args.radius, "radius", d.radius)?,
    )?)
}

fn dataset_config(
    file: &RunFile,
    sampling: SamplingArgs,
    n_traj: Option<usize>,
    radius: f64,
    seed: u64,
) -> Result<DatasetConfig> {
    let d = DatasetConfig::default();
    let spread = file.pick_or(sampling.center_spread, "center_spread", DEFAULT_CENTER_SPREAD)?;
    ensure!(spread.is_finite() && spread >= 0.0, "center spread must be non-negative, got {spread}");
    let cfg = DatasetConfig {
        n_trajectories: file.pick_or(n_traj, "n_traj", d.n_trajectories)?,
        t_end: file.pick_or(sampling.t_end, "t_end", d.t_end)?,
        dt: file.pick_or(sampling.dt, "dt", d.dt)?,
        radius,
        x0: UniformRange::new(-spread, spread),
        y0: UniformRange::new(-spread, spread),
        seed,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(file: &RunFile, out: Option<PathBuf>) -> Result<PathBuf> {
    let dir: PathBuf = file.require(out, "out")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Write a CSV after checking every value is finite.
fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.iter().any(|v| !v.is_finite())) {
        bail!("non-finite value in row {} of {}", i + 1, path.display());
    }
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", fmt_row(row))?;
    }
    out.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let file = RunFile::load(args.shared.config.as_deref())?;
    let seed: u64 = file.require(args.seed, "seed")?;
    let p = penny(&file, args.penny)?;
    let cfg = dataset_config(&file, args.sampling, args.n_traj, p.radius, seed)?;
    let dir = output_dir(&file, args.shared.out)?;
    let dataset = generate_dataset(&cfg, &p)?;
    let manifest = write_dataset(&dir, &dataset).with_context(|| format!("writing dataset to {}", dir.display()))?;
    println!(
        "wrote {} trajectories x {} samples to {}",
        manifest.trajectories.len(),
        cfg.steps() + 1,
        dir.display()
    );
    Ok(())
}

fn metrics_json(m: &FieldMetrics) -> serde_json::Value {
    json!({
        "points": m.points,
        "mean_abs_components": m.mean_abs_components,
        "max_section_angle": m.max_section_angle,
        "lie_algebra_rms_error": m.lie_algebra_rms_error,
        "vertical_residual": m.vertical_residual,
    })
}

fn check_metrics(m: &FieldMetrics) -> Result<()> {
    let values = m
        .mean_abs_components
        .iter()
        .chain([&m.max_section_angle, &m.lie_algebra_rms_error, &m.vertical_residual]);
    for v in values {
        ensure!(v.is_finite(), "non-finite evaluation metric");
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let file = RunFile::load(args.shared.config.as_deref())?;
    let seed: u64 = file.require(args.seed, "seed")?;
    let group: GroupAction = file.require(args.group, "group")?;
    let data_dir: PathBuf = file.require(args.data, "data")?;
    let mut cfg = TrainConfig::new(group, seed);
    cfg.epochs = file.pick_or(args.epochs, "epochs", cfg.epochs)?;
    cfg.learning_rate = file.pick_or(args.lr, "lr", cfg.learning_rate)?;
    if let Some(batch_size) = file.pick(args.batch_size, "batch_size")? {
        cfg.batch = BatchMode::Mini { batch_size };
    }
    cfg.validate()?;
    let dir = output_dir(&file, args.shared.out)?;

    let dataset = read_dataset(&data_dir).with_context(|| format!("reading dataset {}", data_dir.display()))?;
    let (weights, report) = fit(&dataset.trajectories, &cfg)?;
    let held_out = field_metrics(&weights, &dataset.penny, group, &held_out_grid(group))?;
    check_metrics(&held_out)?;

    save_weights(&dir.join(WEIGHTS_FILE), &weights)?;
    write_loss_csv(&dir.join(LOSS_FILE), &report.loss_history)?;
    write_json(&dir.join(METRICS_FILE), &train_metrics(&cfg, &report, &held_out))?;

    let final_loss = report.loss_history.last().copied().unwrap_or(f64::NAN);
    println!("group {group}, {} epochs, {} samples", cfg.epochs, report.samples_used);
    println!("final loss {final_loss:.6e}");
    println!(
        "held-out: mean |f| = ({:.4}, {:.4}, {:.4}), max section angle {:.4} rad, lie algebra rms {:.4}, vertical residual {:.3e}",
        held_out.mean_abs_components[0],
        held_out.mean_abs_components[1],
        held_out.mean_abs_components[2],
        held_out.max_section_angle,
        held_out.lie_algebra_rms_error,
        held_out.vertical_residual
    );
    eprintln!("trained in {:.1} s", report.wall_time_secs);
    Ok(())
}

/// `epoch,loss` with integer epochs.
fn write_loss_csv(path: &Path, history: &[f64]) -> Result<()> {
    if history.iter().any(|l| !l.is_finite()) {
        bail!("non-finite loss in history");
    }
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "epoch,loss")?;
    for (epoch, l) in history.iter().enumerate() {
        writeln!(out, "{epoch},{}", fmt_f64(*l))?;
    }
    out.flush()?;
    Ok(())
}

fn train_metrics(cfg: &TrainConfig, report: &TrainReport, held_out: &FieldMetrics) -> serde_json::Value {
    json!({
        "group": cfg.group.name(),
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "samples_used": report.samples_used,
        "samples_dropped": report.samples_dropped,
        "initial_loss": report.loss_history.first(),
        "final_loss": report.loss_history.last(),
        "train_vertical_residual": {
            "initial": report.initial_vertical_residual,
            "final": report.final_vertical_residual,
        },
        "held_out": metrics_json(held_out),
    })
}

/// Penny and trajectory for the momentum residuals.
fn eval_setting(file: &RunFile, args: &mut EvalArgs) -> Result<(PennyParams, TrajectoryParams, f64, usize)> {
    if let Some(data) = file.pick(args.data.take(), "data")? {
        let data: PathBuf = data;
        let manifest = read_manifest(&data).with_context(|| format!("reading dataset {}", data.display()))?;
        let first = manifest
            .trajectories
            .first()
            .context("dataset manifest lists no trajectories")?;
        return Ok((manifest.penny, first.constants, manifest.config.dt, manifest.config.steps()));
    }
    let p = penny(file, std::mem::take(&mut args.penny))?;
    let seed = file.pick_or(args.seed, "seed", 0)?;
    let cfg = dataset_config(file, std::mem::take(&mut args.sampling), Some(1), p.radius, seed)?;
    Ok((p, cfg.trajectory_params(0), cfg.dt, cfg.steps()))
}

pub fn eval(mut args: EvalArgs) -> Result<()> {
    let file = RunFile::load(args.shared.config.as_deref())?;
    let group: GroupAction = file.require(args.group, "group")?;
    let weights_path: PathBuf = file.require(args.weights.take(), "weights")?;
    let (p, constants, dt, steps) = eval_setting(&file, &mut args)?;
    let grid = match group {
        GroupAction::S1R2 => {
            let n = file.pick_or(args.grid_points, "grid_points", PHI_GRID_POINTS)?;
            ensure!(n >= 1, "grid needs at least one point");
            phi_grid(n)
        }
        GroupAction::Se2 => {
            let side = file.pick_or(args.grid_side, "grid_side", XY_GRID_SIDE)?;
            let half = file.pick_or(args.grid_half_width, "grid_half_width", XY_GRID_HALF_WIDTH)?;
            ensure!(side >= 1, "grid needs at least one point");
            ensure!(half.is_finite() && half >= 0.0, "grid half-width must be non-negative");
            xy_grid(side, half, 0.0, 0.0)
        }
    };
    let dir = output_dir(&file, args.shared.out.take())?;
    let weights = load_weights(&weights_path).with_context(|| format!("reading weights {}", weights_path.display()))?;

    let field_rows = grid
        .iter()
        .map(|q| {
            let f = forward(&weights, q)?;
            let r = group.reference_section(&p, q);
            Ok([&q.to_array()[..], &f, &r].concat())
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&dir.join(FIELD_FILE), "theta,phi,x,y,f1,f2,f3,ref1,ref2,ref3", &field_rows)?;

    let lie_rows = grid
        .iter()
        .map(|q| {
            let xi = group.pullback(q, &forward(&weights, q)?);
            let r = group.pullback(q, &group.reference_section(&p, q));
            Ok([&q.to_array()[..], &xi.0, &r.0].concat())
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&dir.join(LIE_ALGEBRA_FILE), "theta,phi,x,y,xi1,xi2,xi3,ref1,ref2,ref3", &lie_rows)?;

    let traj = Trajectory::explicit(&p, &constants, dt, steps)?;
    let learned = momentum_equation_residual(&p, &traj, |q| learned_algebra(&weights, group, q), group)?;
    let exact = momentum_equation_residual(&p, &traj, |q| group.reference_algebra(&p, q), group)?;
    for (path, series) in [(RESIDUAL_FILE, &learned), (EXACT_RESIDUAL_FILE, &exact)] {
        let rows: Vec<Vec<f64>> = series.times.iter().zip(&series.values).map(|(t, v)| vec![*t, *v]).collect();
        write_csv(&dir.join(path), "t,value", &rows)?;
    }

    let metrics = field_metrics(&weights, &p, group, &grid)?;
    check_metrics(&metrics)?;
    write_json(
        &dir.join(METRICS_FILE),
        &json!({
            "group": group.name(),
            "grid": metrics_json(&metrics),
            "momentum_residual_max": learned.max_abs(),
            "momentum_residual_exact_max": exact.max_abs(),
        }),
    )?;
    println!(
        "{} grid points: mean |f| = ({:.4}, {:.4}, {:.4}), lie algebra rms {:.4}",
        metrics.points,
        metrics.mean_abs_components[0],
        metrics.mean_abs_components[1],
        metrics.mean_abs_components[2],
        metrics.lie_algebra_rms_error
    );
    println!(
        "momentum residual max: learned {:.3e}, exact {:.3e}",
        learned.max_abs(),
        exact.max_abs()
    );
    Ok(())
}

/// NaN components propagate into the residual file check when the head degenerates.
fn learned_algebra(w: &ModelWeights, group: GroupAction, q: &Config) -> LieAlgebraElement {
    forward(w, q)
        .map(|f| group.pullback(q, &f))
        .unwrap_or(LieAlgebraElement([f64::NAN; 3]))
}
