//! Normalized MLP vector field `f: Q -> unit vectors in orbit coordinates`.
//!
//! The network is `4 -> 10 -> 10 -> 10 -> 3` with `tanh` after each hidden
//! affine layer, a linear output layer and a final Euclidean normalization.
//! It is fitted to unit orbit velocities by minimizing the mean of
//! `|f(q_i) - v_i|^2`, and the recovered Lie algebra element at `q` is the
//! pullback of `f(q)`.
//!
//! Angles enter the network wrapped to `[-pi, pi)`: both are circle
//! coordinates, while the stored trajectories keep them unwrapped.
//!
//! Batch sums are split into fixed chunks that may run on any number of
//! threads; the chunk partials are then added in chunk order, so losses and
//! gradients are bit-identical regardless of the thread pool size.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{orbit_velocity, Trajectory, HORIZONTAL_TOL};
use crate::groups::{GroupAction, LieAlgebraElement};
use crate::penny::{Config, PennyParams, State};
use crate::{Error, Result};

/// Layer widths of the vector-field network.
pub const ARCHITECTURE: [usize; 5] = [4, 10, 10, 10, 3];

/// Pre-normalization outputs shorter than this are reported as degenerate.
pub const MIN_HEAD_NORM: f64 = 1e-9;

const CHUNK: usize = 512;

/// Weights and biases of an MLP, stored flat.
///
/// Layer `l` maps `dims[l]` inputs to `dims[l + 1]` outputs; its weight matrix
/// is stored row-major (`dims[l + 1]` rows of `dims[l]`) followed by its bias.
/// The same layout is used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    dims: Vec<usize>,
    params: Vec<f64>,
}

impl ModelWeights {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims[0] != 4 || dims[dims.len() - 1] != 3 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network must map 4 inputs to 3 outputs through non-empty layers, got {dims:?}"
            )));
        }
        let len = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            dims: dims.to_vec(),
            params: vec![0.0; len],
        })
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut w = Self::zeros(dims)?;
        if params.len() != w.params.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters for {dims:?}, got {}",
                w.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("weights must be finite".into()));
        }
        w.params = params;
        Ok(w)
    }

    /// Uniform `±1/sqrt(fan_in)` initialization of weights and biases.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        let mut w = Self::zeros(dims)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for l in 0..w.n_layers() {
            let bound = 1.0 / (w.dims[l] as f64).sqrt();
            let (weights, bias) = w.layer_mut(l);
            for p in weights.iter_mut().chain(bias.iter_mut()) {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(w)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    fn offset(&self, layer: usize) -> usize {
        self.dims[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(weights, bias)` of `layer`.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.dims[layer], self.dims[layer + 1]);
        let start = self.offset(layer);
        let (w, rest) = self.params[start..].split_at(n_in * n_out);
        (w, &rest[..n_out])
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (n_in, n_out) = (self.dims[layer], self.dims[layer + 1]);
        let start = self.offset(layer);
        let (w, rest) = self.params[start..].split_at_mut(n_in * n_out);
        (w, &mut rest[..n_out])
    }

    /// Network output before normalization.
    pub fn head(&self, q: &Config) -> [f64; 3] {
        let mut act = features(q).to_vec();
        for l in 0..self.n_layers() {
            act = self.affine(l, &act);
            if l + 1 < self.n_layers() {
                act.iter_mut().for_each(|a| *a = a.tanh());
            }
        }
        [act[0], act[1], act[2]]
    }

    fn affine(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let n_in = input.len();
        b.iter()
            .enumerate()
            .map(|(r, bias)| {
                w[r * n_in..(r + 1) * n_in]
                    .iter()
                    .zip(input)
                    .fold(*bias, |acc, (wi, xi)| acc + wi * xi)
            })
            .collect()
    }
}

/// Network input: `(wrap(theta), wrap(phi), x, y)`.
pub fn features(q: &Config) -> [f64; 4] {
    [wrap_angle(q.theta), wrap_angle(q.phi), q.x, q.y]
}

/// Representative of `angle` in `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    (angle + PI).rem_euclid(TAU) - PI
}

fn normalize_head(z: [f64; 3]) -> Result<([f64; 3], f64)> {
    let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm >= MIN_HEAD_NORM) {
        return Err(Error::DegenerateHead(norm));
    }
    Ok((z.map(|c| c / norm), norm))
}

/// Unit vector field value at `q`.
pub fn forward(w: &ModelWeights, q: &Config) -> Result<[f64; 3]> {
    normalize_head(w.head(q)).map(|(u, _)| u)
}

/// A training pair: configuration and unit target in orbit coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub q: Config,
    pub target: [f64; 3],
}

/// Mean of `|f(q_i) - target_i|^2` over the batch.
pub fn loss(w: &ModelWeights, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().try_fold(0.0, |acc, s| {
                let u = forward(w, &s.q)?;
                Ok(acc + squared_distance(&u, &s.target))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(partials.iter().sum::<f64>() / batch.len() as f64)
}

fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Loss and its exact gradient with respect to every parameter.
pub fn gradient(w: &ModelWeights, batch: &[Sample]) -> Result<(f64, ModelWeights)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut tape = Tape::new(w);
            let mut grad = vec![0.0; w.params.len()];
            let mut total = 0.0;
            for s in chunk {
                total += tape.accumulate(w, s, &mut grad)?;
            }
            Ok((total, grad))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grad = vec![0.0; w.params.len()];
    let mut total = 0.0;
    for (l, g) in &partials {
        total += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((
        total / batch.len() as f64,
        ModelWeights {
            dims: w.dims.clone(),
            params: grad,
        },
    ))
}

/// Per-layer activations and adjoints reused across samples.
struct Tape {
    acts: Vec<Vec<f64>>,
    adjoint: Vec<f64>,
    next_adjoint: Vec<f64>,
}

impl Tape {
    fn new(w: &ModelWeights) -> Self {
        Self {
            acts: w.dims.iter().map(|&d| vec![0.0; d]).collect(),
            adjoint: Vec::new(),
            next_adjoint: Vec::new(),
        }
    }

    /// Adds the gradient of one sample's loss into `grad` and returns the loss.
    fn accumulate(&mut self, w: &ModelWeights, s: &Sample, grad: &mut [f64]) -> Result<f64> {
        let n_layers = w.n_layers();
        self.acts[0].copy_from_slice(&features(&s.q));
        for l in 0..n_layers {
            let (weights, bias) = w.layer(l);
            let (before, after) = self.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            let n_in = input.len();
            for (r, o) in out.iter_mut().enumerate() {
                let z = weights[r * n_in..(r + 1) * n_in]
                    .iter()
                    .zip(input.iter())
                    .fold(bias[r], |acc, (wi, xi)| acc + wi * xi);
                *o = if l + 1 < n_layers { z.tanh() } else { z };
            }
        }

        let z = &self.acts[n_layers];
        let (u, norm) = normalize_head([z[0], z[1], z[2]])?;
        let g: [f64; 3] = std::array::from_fn(|i| 2.0 * (u[i] - s.target[i]));
        let sample_loss = squared_distance(&u, &s.target);

        // d/dz of z/|z| is (I - u u^T)/|z|.
        let ug: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
        self.adjoint.clear();
        self.adjoint.extend((0..3).map(|i| (g[i] - u[i] * ug) / norm));

        for l in (0..n_layers).rev() {
            let n_in = w.dims[l];
            let n_out = w.dims[l + 1];
            let start = w.offset(l);
            let (weights, _) = w.layer(l);
            let input = &self.acts[l];
            let (gw, rest) = grad[start..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            for r in 0..n_out {
                let d = self.adjoint[r];
                gb[r] += d;
                for (gwi, xi) in gw[r * n_in..(r + 1) * n_in].iter_mut().zip(input) {
                    *gwi += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            self.next_adjoint.clear();
            self.next_adjoint.resize(n_in, 0.0);
            for r in 0..n_out {
                let d = self.adjoint[r];
                for (na, wi) in self.next_adjoint.iter_mut().zip(&weights[r * n_in..(r + 1) * n_in]) {
                    *na += d * wi;
                }
            }
            // input is tanh output of the previous layer
            for (na, a) in self.next_adjoint.iter_mut().zip(input) {
                *na *= 1.0 - a * a;
            }
            std::mem::swap(&mut self.adjoint, &mut self.next_adjoint);
        }
        Ok(sample_loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Full,
    Mini { batch_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: BatchMode,
    pub seed: u64,
    pub group: GroupAction,
}

impl TrainConfig {
    pub fn new(group: GroupAction, seed: u64) -> Self {
        Self {
            epochs: 3000,
            learning_rate: 1e-3,
            batch: BatchMode::Full,
            seed,
            group,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let BatchMode::Mini { batch_size: 0 } = self.batch {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, evaluated on the weights the epoch started from.
    pub loss_history: Vec<f64>,
    pub initial_vertical_residual: f64,
    pub final_vertical_residual: f64,
    pub samples_used: usize,
    pub samples_dropped: usize,
    pub wall_time_secs: f64,
}

/// Training pairs from trajectories: unit orbit velocities with the sign
/// chosen so the first component is non-negative. Returns the samples and the
/// number of states dropped for having zero restricted velocity.
pub fn build_samples(data: &[Trajectory], group: GroupAction) -> Result<(Vec<Sample>, usize)> {
    let mut samples = Vec::new();
    let mut dropped = 0;
    for traj in data {
        let violation = traj.max_constraint_violation();
        if !(violation <= HORIZONTAL_TOL) {
            return Err(Error::NotHorizontal(violation));
        }
        for s in &traj.states {
            match orbit_velocity(group, s) {
                Ok(u) => samples.push(Sample {
                    q: s.q,
                    target: canonical_sign(u),
                }),
                Err(Error::DegenerateVelocity) => dropped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((samples, dropped))
}

fn canonical_sign(u: [f64; 3]) -> [f64; 3] {
    if u[0] < 0.0 {
        u.map(|c| -c)
    } else {
        u
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Fit the vector field to the unit orbit velocities of `data` with Adam.
pub fn train(data: &[Trajectory], cfg: &TrainConfig) -> Result<(ModelWeights, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("no trajectories to train on".into()));
    }
    let started = Instant::now();
    let (samples, dropped) = build_samples(data, cfg.group)?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let penny = data[0].params;
    let configs: Vec<Config> = samples.iter().map(|s| s.q).collect();

    let mut w = ModelWeights::init(&ARCHITECTURE, cfg.seed)?;
    let initial_vertical_residual = vertical_residual(&w, &penny, cfg.group, &configs)?;
    let mut adam = Adam::new(w.params.len());
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let epoch_loss = match cfg.batch {
            BatchMode::Full => {
                let (l, g) = gradient(&w, &samples)?;
                check_finite(epoch, l)?;
                adam.update(&mut w.params, &g.params, cfg.learning_rate);
                l
            }
            BatchMode::Mini { batch_size } => {
                order.shuffle(&mut shuffle_rng);
                let mut weighted = 0.0;
                let mut batch = Vec::with_capacity(batch_size);
                for idx in order.chunks(batch_size) {
                    batch.clear();
                    batch.extend(idx.iter().map(|&i| samples[i]));
                    let (l, g) = gradient(&w, &batch)?;
                    check_finite(epoch, l)?;
                    adam.update(&mut w.params, &g.params, cfg.learning_rate);
                    weighted += l * batch.len() as f64;
                }
                weighted / samples.len() as f64
            }
        };
        if w.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        loss_history.push(epoch_loss);
    }

    let final_vertical_residual = vertical_residual(&w, &penny, cfg.group, &configs)?;
    let report = TrainReport {
        loss_history,
        initial_vertical_residual,
        final_vertical_residual,
        samples_used: samples.len(),
        samples_dropped: dropped,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((w, report))
}

fn check_finite(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, loss })
    }
}

/// Pullback of the learned field at each configuration.
pub fn recover_lie_algebra(
    w: &ModelWeights,
    group: GroupAction,
    qs: &[Config],
) -> Result<Vec<LieAlgebraElement>> {
    qs.iter()
        .map(|q| forward(w, q).map(|f| group.pullback(q, &f)))
        .collect()
}

/// Mean of `|A(embed(f(q)))|^2` over `qs`: how far the learned field is from
/// satisfying the rolling constraints.
pub fn vertical_residual(
    w: &ModelWeights,
    p: &PennyParams,
    group: GroupAction,
    qs: &[Config],
) -> Result<f64> {
    if qs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let partials = qs
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().try_fold(0.0, |acc, q| {
                let f = forward(w, q)?;
                let s = State::new(*q, group.embed(&f));
                Ok(acc + p.connection(&s).norm_squared())
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(partials.iter().sum::<f64>() / qs.len() as f64)
}
