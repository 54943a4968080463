//! Configuration space, Lagrangian and constraint geometry of the vertically
//! rolling penny.
//!
//! Coordinates are always ordered `(theta, phi, x, y)`: `theta` is the rolling
//! angle of a material point on the rim, `phi` the heading of the rolling
//! direction relative to the x axis, `(x, y)` the contact point. Angles are
//! kept unwrapped so that time histories stay continuous.
//!
//! The non-slip constraints `x_dot = R cos(phi) theta_dot` and
//! `y_dot = R sin(phi) theta_dot` are encoded by the Ehresmann connection
//!
//! ```text
//! A = (dx - R cos(phi) dtheta) d/dx + (dy - R sin(phi) dtheta) d/dy
//! ```
//!
//! whose kernel is the constraint distribution
//! `span{ d/dphi, d/dtheta + R cos(phi) d/dx + R sin(phi) d/dy }`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical constants of the penny.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PennyParams {
    /// Mass `m` (kg).
    pub mass: f64,
    /// Moment of inertia `I` about the rolling axis (kg m^2).
    pub spin_inertia: f64,
    /// Moment of inertia `J` about the vertical axis (kg m^2).
    pub yaw_inertia: f64,
    /// Radius `R` (m).
    pub radius: f64,
}

/// A uniform unit disk: `m = R = 1`, `I = m R^2 / 2`, `J = m R^2 / 4`.
impl Default for PennyParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            spin_inertia: 0.5,
            yaw_inertia: 0.25,
            radius: 1.0,
        }
    }
}

impl PennyParams {
    pub fn new(mass: f64, spin_inertia: f64, yaw_inertia: f64, radius: f64) -> Result<Self> {
        let p = Self {
            mass,
            spin_inertia,
            yaw_inertia,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("spin_inertia", self.spin_inertia),
            ("yaw_inertia", self.yaw_inertia),
            ("radius", self.radius),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Same penny with a different radius.
    pub fn with_radius(self, radius: f64) -> Result<Self> {
        Self::new(self.mass, self.spin_inertia, self.yaw_inertia, radius)
    }

    /// Kinetic energy `1/2 I theta_dot^2 + 1/2 J phi_dot^2 + 1/2 m (x_dot^2 + y_dot^2)`.
    pub fn lagrangian(&self, v: &Velocity) -> f64 {
        0.5 * self.spin_inertia * v.theta_dot * v.theta_dot
            + 0.5 * self.yaw_inertia * v.phi_dot * v.phi_dot
            + 0.5 * self.mass * (v.x_dot * v.x_dot + v.y_dot * v.y_dot)
    }

    /// Fiber derivative `dL/dq_dot = (I theta_dot, J phi_dot, m x_dot, m y_dot)`.
    pub fn momentum(&self, v: &Velocity) -> [f64; 4] {
        [
            self.spin_inertia * v.theta_dot,
            self.yaw_inertia * v.phi_dot,
            self.mass * v.x_dot,
            self.mass * v.y_dot,
        ]
    }

    /// Contact-point velocity demanded by rolling without slipping at rate `theta_dot`.
    ///
    /// Every constraint-satisfying quantity in the crate goes through this one
    /// expression, so horizontal states have a connection value of exactly zero.
    pub fn rolling_velocity(&self, phi: f64, theta_dot: f64) -> (f64, f64) {
        let (sin, cos) = phi.sin_cos();
        (self.radius * cos * theta_dot, self.radius * sin * theta_dot)
    }

    /// The connection one-form `A` evaluated on a state.
    pub fn connection(&self, s: &State) -> VerticalPart {
        let (rx, ry) = self.rolling_velocity(s.q.phi, s.v.theta_dot);
        VerticalPart {
            cx: s.v.x_dot - rx,
            cy: s.v.y_dot - ry,
        }
    }

    /// `hor v = v - A(v)`.
    pub fn horizontal_lift(&self, s: &State) -> Velocity {
        let (x_dot, y_dot) = self.rolling_velocity(s.q.phi, s.v.theta_dot);
        Velocity {
            x_dot,
            y_dot,
            ..s.v
        }
    }

    /// Basis `{d/dphi, d/dtheta + R cos(phi) d/dx + R sin(phi) d/dy}` of the
    /// constraint distribution at `q`.
    pub fn distribution_basis(&self, q: &Config) -> [Velocity; 2] {
        let (x_dot, y_dot) = self.rolling_velocity(q.phi, 1.0);
        [
            Velocity::new(0.0, 1.0, 0.0, 0.0),
            Velocity::new(1.0, 0.0, x_dot, y_dot),
        ]
    }

    /// True when the state satisfies both non-slip constraints to `tol`.
    pub fn is_horizontal(&self, s: &State, tol: f64) -> bool {
        self.connection(s).norm() <= tol
    }
}

/// A point of the configuration space `S^1 x S^1 x R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Config {
    pub theta: f64,
    pub phi: f64,
    pub x: f64,
    pub y: f64,
}

impl Config {
    pub fn new(theta: f64, phi: f64, x: f64, y: f64) -> Self {
        Self { theta, phi, x, y }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta, self.phi, self.x, self.y]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// A tangent vector at a configuration, components in `(theta, phi, x, y)` order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub theta_dot: f64,
    pub phi_dot: f64,
    pub x_dot: f64,
    pub y_dot: f64,
}

impl Velocity {
    pub fn new(theta_dot: f64, phi_dot: f64, x_dot: f64, y_dot: f64) -> Self {
        Self {
            theta_dot,
            phi_dot,
            x_dot,
            y_dot,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta_dot, self.phi_dot, self.x_dot, self.y_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn scale(self, c: f64) -> Self {
        Self::from_array(self.to_array().map(|v| c * v))
    }

    pub fn add(self, other: Self) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::new(a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])
    }

    pub fn dot(&self, other: &[f64; 4]) -> f64 {
        self.to_array()
            .iter()
            .zip(other)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// A point of the tangent bundle. Constraint satisfaction is a queryable
/// property, not an invariant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub q: Config,
    pub v: Velocity,
}

impl State {
    pub fn new(q: Config, v: Velocity) -> Self {
        Self { q, v }
    }
}

/// Value of the connection, which lives in `span{d/dx, d/dy}` for the penny.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerticalPart {
    pub cx: f64,
    pub cy: f64,
}

impl VerticalPart {
    pub fn norm_squared(&self) -> f64 {
        self.cx * self.cx + self.cy * self.cy
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn unit() -> PennyParams {
        PennyParams::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_non_positive_params() {
        assert!(PennyParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(PennyParams::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(PennyParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(PennyParams::new(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lagrangian_values() {
        let p = PennyParams::new(3.0, 2.0, 5.0, 0.7).unwrap();
        assert_eq!(p.lagrangian(&Velocity::default()), 0.0);
        assert_eq!(p.lagrangian(&Velocity::new(1.0, 0.0, 0.0, 0.0)), 1.0);
        assert_eq!(unit().lagrangian(&Velocity::new(0.0, 0.0, 3.0, 4.0)), 12.5);
    }

    #[test]
    fn momentum_values() {
        let p = PennyParams::new(2.0, 3.0, 1.0, 1.0).unwrap();
        assert_eq!(p.momentum(&Velocity::new(2.0, 0.0, 0.0, 0.0)), [6.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.momentum(&Velocity::default()), [0.0; 4]);
        assert_eq!(p.momentum(&Velocity::new(0.0, 0.0, 1.0, -1.0)), [0.0, 0.0, 2.0, -2.0]);
    }

    #[test]
    fn connection_values() {
        let s = State::new(Config::default(), Velocity::new(1.0, 0.0, 0.0, 0.0));
        let a = unit().connection(&s);
        assert_eq!((a.cx, a.cy), (-1.0, 0.0));

        let p = PennyParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let s = State::new(
            Config::new(0.0, FRAC_PI_2, 0.0, 0.0),
            Velocity::new(1.0, 0.0, 0.0, 2.0),
        );
        let a = p.connection(&s);
        assert!(a.cx.abs() < 1e-15);
        assert_eq!(a.cy, 0.0);
    }

    #[test]
    fn horizontal_lift_values() {
        let s = State::new(Config::default(), Velocity::new(1.0, 5.0, 9.0, 9.0));
        assert_eq!(unit().horizontal_lift(&s), Velocity::new(1.0, 5.0, 1.0, 0.0));

        let s = State::new(
            Config::new(0.3, 1.1, 2.0, -1.0),
            Velocity::new(0.0, 0.4, 3.0, -7.0),
        );
        assert_eq!(unit().horizontal_lift(&s), Velocity::new(0.0, 0.4, 0.0, 0.0));

        let p = PennyParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
        let q = Config::new(0.0, 0.8, 0.0, 0.0);
        let (x_dot, y_dot) = p.rolling_velocity(q.phi, 2.0);
        let s = State::new(q, Velocity::new(2.0, -1.0, x_dot, y_dot));
        assert_eq!(p.horizontal_lift(&s), s.v);
    }

    #[test]
    fn distribution_basis_values() {
        let [e1, e2] = unit().distribution_basis(&Config::default());
        assert_eq!(e1, Velocity::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(e2, Velocity::new(1.0, 0.0, 1.0, 0.0));

        let p = PennyParams::new(1.0, 1.0, 1.0, 3.0).unwrap();
        let q = Config::new(0.0, FRAC_PI_2, 0.0, 0.0);
        let [e1, e2] = p.distribution_basis(&q);
        assert_eq!(e2.theta_dot, 1.0);
        assert!(e2.x_dot.abs() < 1e-15);
        assert_relative_eq!(e2.y_dot, 3.0);
        for e in [e1, e2] {
            let a = p.connection(&State::new(q, e));
            assert_eq!((a.cx, a.cy), (0.0, 0.0));
        }
    }
}
