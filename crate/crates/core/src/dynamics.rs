//! Closed-form and integrated trajectories of the rolling penny, and seeded
//! dataset generation.
//!
//! With the Lagrangian invariant under both symmetry actions the rates
//! `theta_dot = Omega` and `phi_dot = omega` are constant, and the contact
//! point follows
//!
//! ```text
//! x(t) =  (Omega / omega) R sin(omega t + phi0) + x0
//! y(t) = -(Omega / omega) R cos(omega t + phi0) + y0
//! ```
//!
//! # Dataset RNG
//!
//! A dataset is a pure function of its [`DatasetConfig`]. Trajectory `k` draws
//! its constants from `ChaCha20Rng::seed_from_u64(seed)` switched to stream
//! `k`, in the order: `|Omega|`, sign of `Omega`, `|omega|`, sign of `omega`,
//! `theta0`, `phi0`, `x0`, `y0`. Magnitudes and offsets are uniform on their
//! half-open ranges, signs are fair coin flips. Because every trajectory owns
//! its stream, the output does not depend on how many threads generate it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::groups::GroupAction;
use crate::penny::{Config, PennyParams, State, Velocity};
use crate::{Error, Result};

/// Tolerance on `|A(v)|` for an initial state to count as horizontal.
pub const HORIZONTAL_TOL: f64 = 1e-9;

/// Restricted velocities shorter than this cannot be normalized.
pub const MIN_ORBIT_SPEED: f64 = 1e-9;

/// Integration constants of the closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    /// Rolling rate `Omega = theta_dot` (rad/s).
    pub roll_rate: f64,
    /// Turning rate `omega = phi_dot` (rad/s). Must be nonzero.
    pub yaw_rate: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub x0: f64,
    pub y0: f64,
}

impl TrajectoryParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.roll_rate,
            self.yaw_rate,
            self.theta0,
            self.phi0,
            self.x0,
            self.y0,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("trajectory constants must be finite".into()));
        }
        if self.yaw_rate == 0.0 {
            return Err(Error::InvalidConfig(
                "turning rate omega must be nonzero for the closed-form solution".into(),
            ));
        }
        Ok(())
    }
}

/// Exact state at time `t` on the trajectory with constants `tp`.
pub fn explicit_state(p: &PennyParams, tp: &TrajectoryParams, t: f64) -> Result<State> {
    tp.validate()?;
    let theta = tp.roll_rate * t + tp.theta0;
    let phi = tp.yaw_rate * t + tp.phi0;
    let (sin, cos) = phi.sin_cos();
    let radius_of_turn = tp.roll_rate / tp.yaw_rate * p.radius;
    let q = Config::new(theta, phi, radius_of_turn * sin + tp.x0, -radius_of_turn * cos + tp.y0);
    let (x_dot, y_dot) = p.rolling_velocity(phi, tp.roll_rate);
    Ok(State::new(q, Velocity::new(tp.roll_rate, tp.yaw_rate, x_dot, y_dot)))
}

/// A sampled trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: PennyParams,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(params: PennyParams, times: Vec<f64>, states: Vec<State>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::InvalidConfig(format!(
                "{} time stamps for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: times.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("time stamps must be strictly increasing".into()));
        }
        Ok(Self {
            params,
            times,
            states,
        })
    }

    /// Sample `n + 1` states at `t_k = k dt` from the closed form.
    pub fn explicit(p: &PennyParams, tp: &TrajectoryParams, dt: f64, n: usize) -> Result<Self> {
        check_step(dt)?;
        let times = time_grid(dt, n);
        let states = times
            .iter()
            .map(|&t| explicit_state(p, tp, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(*p, times, states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Grid step, taken from the first interval.
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Largest `|A(v)|` over the trajectory.
    pub fn max_constraint_violation(&self) -> f64 {
        self.states
            .iter()
            .map(|s| self.params.connection(s).norm())
            .fold(0.0, f64::max)
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn time_grid(dt: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 * dt).collect()
}

/// Reduced state `(theta, phi, x, y, theta_dot, phi_dot)`; `x_dot`, `y_dot`
/// are slaved to the constraints.
type Reduced = [f64; 6];

fn reduced_rhs(p: &PennyParams, s: &Reduced) -> Reduced {
    let (x_dot, y_dot) = p.rolling_velocity(s[1], s[4]);
    [s[4], s[5], x_dot, y_dot, 0.0, 0.0]
}

fn axpy(base: &Reduced, h: f64, k: &Reduced) -> Reduced {
    let mut out = *base;
    for (o, d) in out.iter_mut().zip(k) {
        *o += h * d;
    }
    out
}

/// Classic fourth-order Runge-Kutta on the constrained equations of motion
/// `theta'' = 0`, `phi'' = 0`, `x' = R cos(phi) theta'`, `y' = R sin(phi) theta'`.
///
/// Returns `n + 1` states including `s0`.
pub fn integrate_rk4(p: &PennyParams, s0: &State, dt: f64, n: usize) -> Result<Trajectory> {
    check_step(dt)?;
    let violation = p.connection(s0).norm();
    if !(violation <= HORIZONTAL_TOL) {
        return Err(Error::NotHorizontal(violation));
    }
    let mut y: Reduced = [
        s0.q.theta,
        s0.q.phi,
        s0.q.x,
        s0.q.y,
        s0.v.theta_dot,
        s0.v.phi_dot,
    ];
    // Kahan compensation for the state sums; the unwrapped angles grow
    // linearly and would otherwise pick up roundoff drift over long runs.
    let mut carry: Reduced = [0.0; 6];
    let mut states = Vec::with_capacity(n + 1);
    states.push(reduced_to_state(p, &y));
    for _ in 0..n {
        let k1 = reduced_rhs(p, &y);
        let k2 = reduced_rhs(p, &axpy(&y, 0.5 * dt, &k1));
        let k3 = reduced_rhs(p, &axpy(&y, 0.5 * dt, &k2));
        let k4 = reduced_rhs(p, &axpy(&y, dt, &k3));
        for i in 0..6 {
            let increment = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - carry[i];
            let sum = y[i] + increment;
            carry[i] = (sum - y[i]) - increment;
            y[i] = sum;
        }
        states.push(reduced_to_state(p, &y));
    }
    Trajectory::new(*p, time_grid(dt, n), states)
}

fn reduced_to_state(p: &PennyParams, y: &Reduced) -> State {
    let (x_dot, y_dot) = p.rolling_velocity(y[1], y[4]);
    State::new(
        Config::new(y[0], y[1], y[2], y[3]),
        Velocity::new(y[4], y[5], x_dot, y_dot),
    )
}

/// Unit orbit velocity: `normalize(phi_dot, x_dot, y_dot)` for SE(2),
/// `normalize(theta_dot, x_dot, y_dot)` for S1 x R2.
pub fn orbit_velocity(group: GroupAction, s: &State) -> Result<[f64; 3]> {
    let r = group.restrict(&s.v);
    let norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm >= MIN_ORBIT_SPEED) {
        return Err(Error::DegenerateVelocity);
    }
    Ok(r.map(|c| c / norm))
}

/// Half-open interval `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub min: f64,
    pub max: f64,
}

impl UniformRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::InvalidConfig(format!(
                "{name} range [{}, {}) is not a finite interval",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            // gen_range panics on an empty range; still consume one draw so
            // the stream layout does not depend on the range.
            let _: f64 = rng.gen();
            self.min
        } else {
            rng.gen_range(self.min..self.max)
        }
    }
}

/// Magnitude in `[min, max)` with a fair random sign, i.e. `±[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRange {
    pub min: f64,
    pub max: f64,
}

impl SignedRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        UniformRange::new(self.min, self.max).validate(name)?;
        if self.min < 0.0 {
            return Err(Error::InvalidConfig(format!("{name} magnitude range must be non-negative")));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let magnitude = UniformRange::new(self.min, self.max).sample(rng);
        if rng.gen::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// How a training set is drawn from the closed-form solution.
///
/// The radius is shared by every trajectory: the S1 x R2 horizontal direction
/// depends on it, so mixing radii leaves no single field to learn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_trajectories: usize,
    pub t_end: f64,
    pub dt: f64,
    pub radius: f64,
    pub roll_rate: SignedRange,
    pub yaw_rate: SignedRange,
    pub theta0: UniformRange,
    pub phi0: UniformRange,
    pub x0: UniformRange,
    pub y0: UniformRange,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            n_trajectories: 32,
            t_end: 20.0,
            dt: 0.01,
            radius: 1.0,
            roll_rate: SignedRange::new(0.5, 2.0),
            yaw_rate: SignedRange::new(0.5, 2.0),
            theta0: UniformRange::new(0.0, tau),
            phi0: UniformRange::new(0.0, tau),
            x0: UniformRange::new(-DEFAULT_CENTER_SPREAD, DEFAULT_CENTER_SPREAD),
            y0: UniformRange::new(-DEFAULT_CENTER_SPREAD, DEFAULT_CENTER_SPREAD),
            seed: 0,
        }
    }
}

/// Half-width of the default box for turning-circle centres `(x0, y0)`.
pub const DEFAULT_CENTER_SPREAD: f64 = 1.0;

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidConfig("n_trajectories must be at least 1".into()));
        }
        check_step(self.dt)?;
        if !(self.t_end.is_finite() && self.t_end > self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} must exceed dt = {}",
                self.t_end, self.dt
            )));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidConfig(format!("radius must be positive, got {}", self.radius)));
        }
        self.roll_rate.validate("roll_rate")?;
        self.yaw_rate.validate("yaw_rate")?;
        if self.yaw_rate.min <= 0.0 {
            return Err(Error::InvalidConfig("yaw_rate magnitudes must be bounded away from zero".into()));
        }
        self.theta0.validate("theta0")?;
        self.phi0.validate("phi0")?;
        self.x0.validate("x0")?;
        self.y0.validate("y0")?;
        Ok(())
    }

    /// Number of steps; each trajectory holds `steps() + 1` samples.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Constants of trajectory `index`, drawn from its own ChaCha20 stream.
    pub fn trajectory_params(&self, index: usize) -> TrajectoryParams {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let roll_rate = self.roll_rate.sample(&mut rng);
        let yaw_rate = self.yaw_rate.sample(&mut rng);
        TrajectoryParams {
            roll_rate,
            yaw_rate,
            theta0: self.theta0.sample(&mut rng),
            phi0: self.phi0.sample(&mut rng),
            x0: self.x0.sample(&mut rng),
            y0: self.y0.sample(&mut rng),
        }
    }
}

/// A generated dataset with the constants behind each trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub penny: PennyParams,
    pub constants: Vec<TrajectoryParams>,
    pub trajectories: Vec<Trajectory>,
}

/// Sample `cfg.n_trajectories` closed-form trajectories. The radius of `p`
/// is replaced by `cfg.radius`.
pub fn generate_dataset(cfg: &DatasetConfig, p: &PennyParams) -> Result<Dataset> {
    cfg.validate()?;
    let penny = p.with_radius(cfg.radius)?;
    let steps = cfg.steps();
    let (constants, trajectories): (Vec<_>, Vec<_>) = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|k| {
            let tp = cfg.trajectory_params(k);
            Trajectory::explicit(&penny, &tp, cfg.dt, steps).map(|traj| (tp, traj))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(Dataset {
        config: cfg.clone(),
        penny,
        constants,
        trajectories,
    })
}
