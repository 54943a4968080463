//! Nonholonomic momentum map, momentum-equation residuals and conservation checks.
//!
//! For a Lie algebra element `xi(q)` whose generator `xi_Q` lies in the
//! constraint distribution, trajectories satisfy
//!
//! ```text
//! d/dt <J_nhc, xi> = dL/dq_dot^i [d/dt xi_Q]^i,   <J_nhc, xi> = dL/dq_dot^i (xi_Q)^i.
//! ```
//!
//! Both sides are estimated here with second-order finite differences along a
//! sampled trajectory. The generator is embedded into `(theta, phi, x, y)`
//! first and then differentiated componentwise.

use crate::dynamics::Trajectory;
use crate::groups::{GroupAction, LieAlgebraElement};
use crate::penny::{Config, PennyParams, State, Velocity};
use crate::{Error, Result};

/// Pairing `<J_nhc, xi> = I theta_dot xi_theta + J phi_dot xi_phi + m x_dot xi_x + m y_dot xi_y`.
pub fn nhc_momentum(p: &PennyParams, s: &State, xi_q: &Velocity) -> f64 {
    xi_q.dot(&p.momentum(&s.v))
}

/// A scalar time series on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MomentumSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidConfig(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: times.len(),
            });
        }
        Ok(Self { times, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|v_k - v_0|`.
    pub fn max_deviation(&self) -> f64 {
        let v0 = self.values[0];
        self.values.iter().fold(0.0, |m, v| m.max((v - v0).abs()))
    }

    /// [`max_deviation`](Self::max_deviation) relative to `|v_0|`; absolute when `v_0 = 0`.
    pub fn max_relative_deviation(&self) -> f64 {
        let v0 = self.values[0].abs();
        let dev = self.max_deviation();
        if v0 > 0.0 {
            dev / v0
        } else {
            dev
        }
    }
}

/// Second-order derivative of uniformly sampled values: central differences
/// inside, one-sided three-point stencils at both ends.
pub fn time_derivative(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let h2 = 2.0 * dt;
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / h2);
    d.extend(values.windows(3).map(|w| (w[2] - w[0]) / h2));
    d.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / h2);
    Ok(d)
}

/// Both sides of the momentum equation on the interior samples of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumBalance {
    pub times: Vec<f64>,
    /// `d/dt <J_nhc, xi>`.
    pub lhs: Vec<f64>,
    /// `dL/dq_dot [d/dt xi_Q]`.
    pub rhs: Vec<f64>,
}

impl MomentumBalance {
    pub fn residual(&self) -> MomentumSeries {
        MomentumSeries {
            times: self.times.clone(),
            values: self.lhs.iter().zip(&self.rhs).map(|(l, r)| (l - r).abs()).collect(),
        }
    }
}

pub fn momentum_balance<F>(
    p: &PennyParams,
    traj: &Trajectory,
    xi_of_q: F,
    group: GroupAction,
) -> Result<MomentumBalance>
where
    F: Fn(&Config) -> LieAlgebraElement,
{
    let n = traj.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let dt = traj.dt();
    let generators: Vec<[f64; 4]> = traj
        .states
        .iter()
        .map(|s| group.generator(&s.q, &xi_of_q(&s.q)).to_array())
        .collect();
    let pairing: Vec<f64> = traj
        .states
        .iter()
        .zip(&generators)
        .map(|(s, g)| nhc_momentum(p, s, &Velocity::from_array(*g)))
        .collect();
    let lhs = time_derivative(&pairing, dt)?;
    let component_rates = (0..4)
        .map(|i| {
            let series: Vec<f64> = generators.iter().map(|g| g[i]).collect();
            time_derivative(&series, dt)
        })
        .collect::<Result<Vec<_>>>()?;

    let interior = 1..n - 1;
    let rhs = interior
        .clone()
        .map(|k| {
            let momentum = p.momentum(&traj.states[k].v);
            (0..4).map(|i| momentum[i] * component_rates[i][k]).sum()
        })
        .collect();
    Ok(MomentumBalance {
        times: traj.times[interior.clone()].to_vec(),
        lhs: lhs[interior].to_vec(),
        rhs,
    })
}

/// `|LHS - RHS|` of the momentum equation at each interior sample.
pub fn momentum_equation_residual<F>(
    p: &PennyParams,
    traj: &Trajectory,
    xi_of_q: F,
    group: GroupAction,
) -> Result<MomentumSeries>
where
    F: Fn(&Config) -> LieAlgebraElement,
{
    momentum_balance(p, traj, xi_of_q, group).map(|b| b.residual())
}

/// The two conserved momenta of the rolling penny.
#[derive(Debug, Clone, PartialEq)]
pub struct Conservation {
    /// `J phi_dot`.
    pub yaw: MomentumSeries,
    /// `(I + m R^2) theta_dot`.
    pub roll: MomentumSeries,
}

impl Conservation {
    pub fn max_relative_deviation(&self) -> f64 {
        self.yaw
            .max_relative_deviation()
            .max(self.roll.max_relative_deviation())
    }
}

pub fn conserved_quantities(p: &PennyParams, traj: &Trajectory) -> Result<Conservation> {
    let roll_inertia = p.spin_inertia + p.mass * p.radius * p.radius;
    let yaw = traj.states.iter().map(|s| p.yaw_inertia * s.v.phi_dot).collect();
    let roll = traj.states.iter().map(|s| roll_inertia * s.v.theta_dot).collect();
    Ok(Conservation {
        yaw: MomentumSeries::new(traj.times.clone(), yaw)?,
        roll: MomentumSeries::new(traj.times.clone(), roll)?,
    })
}
