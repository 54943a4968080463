//! On-disk formats.
//!
//! * Trajectory CSV: header `t,theta,phi,x,y,theta_dot,phi_dot,x_dot,y_dot`,
//!   one row per sample.
//! * Series CSV: header `t,value`.
//! * Dataset manifest: `manifest.json` next to the trajectory files, listing
//!   the penny, the generation config (including seed) and per-file constants.
//! * Weights: a versioned plain-text file, see [`write_weights`].
//!
//! Numbers are written in scientific notation with 17 significant digits so
//! every `f64` round-trips exactly. Lines end with `\n`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::MomentumSeries;
use crate::dynamics::{Dataset, DatasetConfig, Trajectory, TrajectoryParams};
use crate::learner::ModelWeights;
use crate::penny::{Config, PennyParams, State, Velocity};
use crate::{Error, Result};

pub const TRAJECTORY_HEADER: &str = "t,theta,phi,x,y,theta_dot,phi_dot,x_dot,y_dot";
pub const SERIES_HEADER: &str = "t,value";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FORMAT: &str = "penny-mlp";
pub const WEIGHTS_VERSION: u32 = 1;

/// `f64` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-joined row of [`fmt_f64`] values.
pub fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{field}' is not a number")))
}

pub fn write_trajectory_csv<W: Write>(mut out: W, traj: &Trajectory) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![*t];
        row.extend(s.q.to_array());
        row.extend(s.v.to_array());
        writeln!(out, "{}", fmt_row(&row))?;
    }
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R, params: PennyParams) -> Result<Trajectory> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != TRAJECTORY_HEADER {
        return Err(Error::Parse(format!("unexpected trajectory header '{header}'")));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_f64(f, i + 2))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != 9 {
            return Err(Error::Parse(format!("line {}: expected 9 columns, got {}", i + 2, row.len())));
        }
        times.push(row[0]);
        states.push(State::new(
            Config::new(row[1], row[2], row[3], row[4]),
            Velocity::new(row[5], row[6], row[7], row[8]),
        ));
    }
    Trajectory::new(params, times, states)
}

pub fn write_series_csv<W: Write>(mut out: W, series: &MomentumSeries) -> Result<()> {
    writeln!(out, "{SERIES_HEADER}")?;
    for (t, v) in series.times.iter().zip(&series.values) {
        writeln!(out, "{}", fmt_row(&[*t, *v]))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub constants: TrajectoryParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub penny: PennyParams,
    pub config: DatasetConfig,
    pub trajectories: Vec<ManifestEntry>,
}

pub fn trajectory_file_name(index: usize) -> String {
    format!("traj_{index:04}.csv")
}

/// Write every trajectory and the manifest into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(dataset.trajectories.len());
    for (k, (traj, constants)) in dataset.trajectories.iter().zip(&dataset.constants).enumerate() {
        let file = trajectory_file_name(k);
        let mut out = BufWriter::new(File::create(dir.join(&file))?);
        write_trajectory_csv(&mut out, traj)?;
        out.flush()?;
        entries.push(ManifestEntry {
            file,
            constants: *constants,
        });
    }
    let manifest = Manifest {
        format: "penny-dataset".into(),
        version: 1,
        penny: dataset.penny,
        config: dataset.config.clone(),
        trajectories: entries,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    manifest.penny.validate()?;
    let trajectories = manifest
        .trajectories
        .iter()
        .map(|e| read_trajectory_csv(File::open(dir.join(&e.file))?, manifest.penny))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: manifest.config,
        penny: manifest.penny,
        constants: manifest.trajectories.iter().map(|e| e.constants).collect(),
        trajectories,
    })
}

/// Weights file layout:
///
/// ```text
/// format penny-mlp 1
/// dims 4 10 10 10 3
/// layer 0 weights 10 4
/// <10 rows of 4 values>
/// layer 0 bias 10
/// <1 row of 10 values>
/// ...
/// ```
pub fn write_weights<W: Write>(mut out: W, w: &ModelWeights) -> Result<()> {
    writeln!(out, "format {WEIGHTS_FORMAT} {WEIGHTS_VERSION}")?;
    let dims: Vec<String> = w.dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "dims {}", dims.join(" "))?;
    for l in 0..w.n_layers() {
        let (weights, bias) = w.layer(l);
        let (n_in, n_out) = (w.dims()[l], w.dims()[l + 1]);
        writeln!(out, "layer {l} weights {n_out} {n_in}")?;
        for row in weights.chunks(n_in) {
            writeln!(out, "{}", fmt_values(row))?;
        }
        writeln!(out, "layer {l} bias {n_out}")?;
        writeln!(out, "{}", fmt_values(bias))?;
    }
    Ok(())
}

fn fmt_values(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ")
}

pub fn read_weights<R: Read>(input: R) -> Result<ModelWeights> {
    let mut text = String::new();
    BufReader::new(input).read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Parse(format!("weights file ended before {what}")))
    };

    let (n, header) = next("format line")?;
    let header: Vec<&str> = header.split_whitespace().collect();
    if header != ["format", WEIGHTS_FORMAT, &WEIGHTS_VERSION.to_string()] {
        return Err(Error::Parse(format!("line {n}: unsupported weights format {header:?}")));
    }
    let (n, dims_line) = next("dims line")?;
    let dims = match dims_line.split_whitespace().collect::<Vec<_>>().split_first() {
        Some((&"dims", rest)) => rest
            .iter()
            .map(|d| d.parse::<usize>().map_err(|_| Error::Parse(format!("line {n}: bad dimension '{d}'"))))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Parse(format!("line {n}: expected 'dims ...'"))),
    };
    let mut w = ModelWeights::zeros(&dims)?;
    for l in 0..w.n_layers() {
        let (n_in, n_out) = (dims[l], dims[l + 1]);
        let (n, line) = next("layer weights header")?;
        expect_header(line, n, &format!("layer {l} weights {n_out} {n_in}"))?;
        let mut weights = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_out {
            let (n, row) = next("weight row")?;
            weights.extend(parse_values(row, n, n_in)?);
        }
        let (n, line) = next("layer bias header")?;
        expect_header(line, n, &format!("layer {l} bias {n_out}"))?;
        let (n, row) = next("bias row")?;
        let bias = parse_values(row, n, n_out)?;
        let (wl, bl) = w.layer_mut(l);
        wl.copy_from_slice(&weights);
        bl.copy_from_slice(&bias);
    }
    if let Some((i, _)) = lines.next() {
        return Err(Error::Parse(format!("line {}: trailing content", i + 1)));
    }
    if w.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Parse("weights must be finite".into()));
    }
    Ok(w)
}

fn expect_header(line: &str, n: usize, expected: &str) -> Result<()> {
    if line.split_whitespace().collect::<Vec<_>>() != expected.split(' ').collect::<Vec<_>>() {
        return Err(Error::Parse(format!("line {n}: expected '{expected}', got '{line}'")));
    }
    Ok(())
}

fn parse_values(row: &str, n: usize, count: usize) -> Result<Vec<f64>> {
    let values = row
        .split_whitespace()
        .map(|f| parse_f64(f, n))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(Error::Parse(format!("line {n}: expected {count} values, got {}", values.len())));
    }
    Ok(values)
}

pub fn save_weights(path: &Path, w: &ModelWeights) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_weights(&mut out, w)?;
    out.flush()?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<ModelWeights> {
    read_weights(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::ARCHITECTURE;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for v in [std::f64::consts::PI, 1e-300, -123456.789, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn weights_round_trip_exactly() {
        let w = ModelWeights::init(&ARCHITECTURE, 42).unwrap();
        let mut buf = Vec::new();
        write_weights(&mut buf, &w).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("format penny-mlp 1\ndims 4 10 10 10 3\nlayer 0 weights 10 4\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_weights(&buf[..]).unwrap(), w);
    }

    #[test]
    fn malformed_weights_are_rejected() {
        let w = ModelWeights::init(&ARCHITECTURE, 1).unwrap();
        let mut buf = Vec::new();
        write_weights(&mut buf, &w).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let wrong_version = text.replacen("penny-mlp 1", "penny-mlp 2", 1);
        assert!(read_weights(wrong_version.as_bytes()).is_err());
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(read_weights(truncated.as_bytes()).is_err());
        let garbage = text.replacen("e-1", "e-1x", 1);
        assert!(read_weights(garbage.as_bytes()).is_err());
        assert!(read_weights("".as_bytes()).is_err());
    }

    #[test]
    fn trajectory_header_is_checked() {
        let p = PennyParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(read_trajectory_csv("t,x\n0,1\n".as_bytes(), p).is_err());
        let short = format!("{TRAJECTORY_HEADER}\n0,1,2\n1,1,2\n");
        assert!(read_trajectory_csv(short.as_bytes(), p).is_err());
    }
}
