//! Learning the constraint geometry of the vertically rolling penny.
//!
//! The crate is organised bottom-up:
//!
//! * [`penny`]: configuration space, Lagrangian, non-slip constraints,
//!   Ehresmann connection and horizontal lift.
//! * [`groups`]: the SE(2) and S1 x R2 actions, their generators and the
//!   pushforward/pullback between Lie algebra and orbit coordinates.
//! * [`dynamics`]: closed-form trajectories, an RK4 integrator for the
//!   constrained equations of motion, and seeded dataset generation.
//! * [`learner`]: a small normalized MLP vector field trained to match unit
//!   orbit velocities, plus Lie algebra recovery through the pullback.
//! * [`evaluation`]: held-out grids and accuracy metrics of a trained field
//!   against the analytic horizontal directions.
//! * [`diagnostics`]: nonholonomic momentum map, momentum-equation residuals
//!   and conservation checks.
//! * [`io`]: CSV, manifest and weights-file formats.
//!
//! All coordinates are ordered `(theta, phi, x, y)`.

pub mod diagnostics;
pub mod dynamics;
pub mod evaluation;
pub mod groups;
pub mod io;
pub mod learner;
pub mod penny;

pub use dynamics::{DatasetConfig, SignedRange, Trajectory, TrajectoryParams, UniformRange};
pub use groups::{GroupAction, GroupElement, LieAlgebraElement};
pub use learner::{BatchMode, ModelWeights, TrainConfig, TrainReport};
pub use penny::{Config, PennyParams, State, Velocity, VerticalPart};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid penny parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state violates the rolling constraints (|A(v)| = {0:e})")]
    NotHorizontal(f64),
    #[error("zero restricted velocity, cannot normalize")]
    DegenerateVelocity,
    #[error("network output norm {0:e} too small to normalize")]
    DegenerateHead(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
