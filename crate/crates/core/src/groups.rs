//! The two symmetry actions of the rolling penny.
//!
//! * `Se2` acts by `(alpha, a, b): (theta, phi, x, y) -> (theta, phi + alpha,
//!   x cos(alpha) - y sin(alpha) + a, x sin(alpha) + y cos(alpha) + b)`.
//!   Its orbits are tangent to `span{d/dphi, d/dx, d/dy}` and vectors in orbit
//!   coordinates are ordered `(phi, x, y)`.
//! * `S1R2` acts by `(beta, lambda, mu): (theta, phi, x, y) -> (theta + beta,
//!   phi, x + lambda, y + mu)`. Orbit coordinates are ordered `(theta, x, y)`.
//!
//! Lie algebra coordinates are taken in the generator basis `(1,0,0)`,
//! `(0,1,0)`, `(0,0,1)` of each group. The pushforward maps them to orbit
//! coordinates at a configuration and the pullback is its inverse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::penny::{Config, PennyParams, State, Velocity};
use crate::{Error, Result};

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupAction {
    /// Rigid motions of the plane, also turning the heading `phi`.
    Se2,
    /// Rolling angle shifts together with planar translations.
    S1R2,
}

impl GroupAction {
    pub const ALL: [GroupAction; 2] = [GroupAction::Se2, GroupAction::S1R2];

    pub fn name(self) -> &'static str {
        match self {
            GroupAction::Se2 => "se2",
            GroupAction::S1R2 => "s1r2",
        }
    }

    /// Names of the three orbit coordinates, in storage order.
    pub fn orbit_axes(self) -> [&'static str; 3] {
        match self {
            GroupAction::Se2 => ["phi", "x", "y"],
            GroupAction::S1R2 => ["theta", "x", "y"],
        }
    }

    pub fn act(self, g: &GroupElement, q: &Config) -> Config {
        let [a1, a2, a3] = g.0;
        match self {
            GroupAction::Se2 => {
                let (sin, cos) = a1.sin_cos();
                Config::new(
                    q.theta,
                    q.phi + a1,
                    q.x * cos - q.y * sin + a2,
                    q.x * sin + q.y * cos + a3,
                )
            }
            GroupAction::S1R2 => Config::new(q.theta + a1, q.phi, q.x + a2, q.y + a3),
        }
    }

    /// Tangent lift of [`act`](Self::act): SE(2) rotates `(x_dot, y_dot)` by
    /// `alpha`, S1 x R2 leaves velocities unchanged.
    pub fn act_state(self, g: &GroupElement, s: &State) -> State {
        let q = self.act(g, &s.q);
        let v = match self {
            GroupAction::Se2 => {
                let (sin, cos) = g.0[0].sin_cos();
                Velocity {
                    x_dot: s.v.x_dot * cos - s.v.y_dot * sin,
                    y_dot: s.v.x_dot * sin + s.v.y_dot * cos,
                    ..s.v
                }
            }
            GroupAction::S1R2 => s.v,
        };
        State::new(q, v)
    }

    /// Group product `outer * inner`, the element acting as `inner` followed by `outer`.
    pub fn compose(self, outer: &GroupElement, inner: &GroupElement) -> GroupElement {
        let [a2, x2, y2] = outer.0;
        let [a1, x1, y1] = inner.0;
        match self {
            GroupAction::Se2 => {
                let (sin, cos) = a2.sin_cos();
                GroupElement([
                    a1 + a2,
                    x1 * cos - y1 * sin + x2,
                    x1 * sin + y1 * cos + y2,
                ])
            }
            GroupAction::S1R2 => GroupElement([a1 + a2, x1 + x2, y1 + y2]),
        }
    }

    /// Matrix taking Lie algebra coordinates to orbit coordinates at `q`.
    pub fn pushforward_matrix(self, q: &Config) -> Matrix3 {
        match self {
            // (1,0,0)_Q = d/dphi - y d/dx + x d/dy
            GroupAction::Se2 => [[1.0, 0.0, 0.0], [-q.y, 1.0, 0.0], [q.x, 0.0, 1.0]],
            GroupAction::S1R2 => IDENTITY,
        }
    }

    pub fn pullback_matrix(self, q: &Config) -> Matrix3 {
        match self {
            GroupAction::Se2 => [[1.0, 0.0, 0.0], [q.y, 1.0, 0.0], [-q.x, 0.0, 1.0]],
            GroupAction::S1R2 => IDENTITY,
        }
    }

    pub fn pushforward(self, q: &Config, xi: &LieAlgebraElement) -> [f64; 3] {
        mat_vec(&self.pushforward_matrix(q), &xi.0)
    }

    pub fn pullback(self, q: &Config, field: &[f64; 3]) -> LieAlgebraElement {
        LieAlgebraElement(mat_vec(&self.pullback_matrix(q), field))
    }

    /// Picks the orbit components out of a full velocity.
    pub fn restrict(self, v: &Velocity) -> [f64; 3] {
        match self {
            GroupAction::Se2 => [v.phi_dot, v.x_dot, v.y_dot],
            GroupAction::S1R2 => [v.theta_dot, v.x_dot, v.y_dot],
        }
    }

    /// Places an orbit-coordinate vector into `(theta, phi, x, y)`, with the
    /// missing coordinate set to zero.
    pub fn embed(self, f: &[f64; 3]) -> Velocity {
        match self {
            GroupAction::Se2 => Velocity::new(0.0, f[0], f[1], f[2]),
            GroupAction::S1R2 => Velocity::new(f[0], 0.0, f[1], f[2]),
        }
    }

    /// Infinitesimal generator `xi_Q(q)` as a full tangent vector.
    pub fn generator(self, q: &Config, xi: &LieAlgebraElement) -> Velocity {
        self.embed(&self.pushforward(q, xi))
    }

    /// Unit vector spanning the intersection of the constraint distribution
    /// with the orbit tangent space, first component positive.
    pub fn reference_section(self, p: &PennyParams, q: &Config) -> [f64; 3] {
        match self {
            GroupAction::Se2 => [1.0, 0.0, 0.0],
            GroupAction::S1R2 => {
                let (cx, cy) = p.rolling_velocity(q.phi, 1.0);
                let rate = 1.0 / (1.0 + cx * cx + cy * cy).sqrt();
                let (x_dot, y_dot) = p.rolling_velocity(q.phi, rate);
                [rate, x_dot, y_dot]
            }
        }
    }

    /// The Lie algebra element whose generator spans the reference section:
    /// `(1, y, -x)` for SE(2), `(1, R cos(phi), R sin(phi))` for S1 x R2.
    pub fn reference_algebra(self, p: &PennyParams, q: &Config) -> LieAlgebraElement {
        match self {
            GroupAction::Se2 => LieAlgebraElement([1.0, q.y, -q.x]),
            GroupAction::S1R2 => {
                let (cx, cy) = p.rolling_velocity(q.phi, 1.0);
                LieAlgebraElement([1.0, cx, cy])
            }
        }
    }
}

impl fmt::Display for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se2" => Ok(GroupAction::Se2),
            "s1r2" => Ok(GroupAction::S1R2),
            other => Err(Error::Parse(format!("unknown group '{other}', expected se2 or s1r2"))),
        }
    }
}

/// Group parameters: `(alpha, a, b)` for SE(2), `(beta, lambda, mu)` for S1 x R2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupElement(pub [f64; 3]);

impl GroupElement {
    pub fn identity() -> Self {
        Self([0.0; 3])
    }
}

/// Coordinates of a Lie algebra element in the generator basis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LieAlgebraElement(pub [f64; 3]);

const IDENTITY: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat_vec(m: &Matrix3, v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}
