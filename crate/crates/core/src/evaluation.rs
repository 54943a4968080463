//! Held-out grids and accuracy metrics for a trained vector field.
//!
//! A learned field is only determined up to a global sign, so every
//! comparison against the analytic references first picks the sign that
//! agrees with the majority of grid points.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::groups::{GroupAction, LieAlgebraElement};
use crate::learner::{forward, recover_lie_algebra, vertical_residual, ModelWeights};
use crate::penny::{Config, PennyParams};
use crate::{Error, Result};

pub const PHI_GRID_POINTS: usize = 64;
pub const XY_GRID_SIDE: usize = 16;
pub const XY_GRID_HALF_WIDTH: f64 = 2.0;

/// `phi = 2 pi k / n` with `theta = x = y = 0`.
pub fn phi_grid(n: usize) -> Vec<Config> {
    (0..n)
        .map(|k| Config::new(0.0, TAU * k as f64 / n as f64, 0.0, 0.0))
        .collect()
}

/// `side x side` points on `[-half_width, half_width]^2`, x varying fastest.
/// A single point sits at the origin.
pub fn xy_grid(side: usize, half_width: f64, theta: f64, phi: f64) -> Vec<Config> {
    let coord = |i: usize| {
        if side == 1 {
            0.0
        } else {
            -half_width + 2.0 * half_width * i as f64 / (side - 1) as f64
        }
    };
    (0..side)
        .flat_map(|j| (0..side).map(move |i| Config::new(theta, phi, coord(i), coord(j))))
        .collect()
}

/// The grid on which acceptance metrics are reported: the 64-point `phi`
/// circle for S1 x R2, and for SE(2) the 16 x 16 `(x, y)` square repeated at
/// four headings.
pub fn held_out_grid(group: GroupAction) -> Vec<Config> {
    match group {
        GroupAction::S1R2 => phi_grid(PHI_GRID_POINTS),
        GroupAction::Se2 => (0..4)
            .flat_map(|k| xy_grid(XY_GRID_SIDE, XY_GRID_HALF_WIDTH, 0.0, k as f64 * FRAC_PI_2))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMetrics {
    pub points: usize,
    /// Mean of `|f_i|` per orbit component.
    pub mean_abs_components: [f64; 3],
    /// Largest angle (rad) between `f` and the signed reference section.
    pub max_section_angle: f64,
    /// RMS over points and components of `xi/|xi| - s xi_ref/|xi_ref|`.
    pub lie_algebra_rms_error: f64,
    pub vertical_residual: f64,
}

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::DegenerateVelocity);
    }
    Ok(v.map(|c| c / n))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `+1` if at least half of the pairs point the same way, else `-1`.
fn majority_sign(pairs: &[([f64; 3], [f64; 3])]) -> f64 {
    let agree = pairs.iter().filter(|(a, b)| dot(a, b) >= 0.0).count();
    if 2 * agree >= pairs.len() {
        1.0
    } else {
        -1.0
    }
}

/// Reference Lie algebra directions on `qs`.
pub fn reference_lie_algebra(p: &PennyParams, group: GroupAction, qs: &[Config]) -> Vec<LieAlgebraElement> {
    qs.iter().map(|q| group.reference_algebra(p, q)).collect()
}

pub fn field_metrics(
    w: &ModelWeights,
    p: &PennyParams,
    group: GroupAction,
    qs: &[Config],
) -> Result<FieldMetrics> {
    if qs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = qs.len() as f64;
    let field = qs.iter().map(|q| forward(w, q)).collect::<Result<Vec<_>>>()?;

    let mut mean_abs_components = [0.0; 3];
    for f in &field {
        for (m, c) in mean_abs_components.iter_mut().zip(f) {
            *m += c.abs() / n;
        }
    }

    let sections: Vec<([f64; 3], [f64; 3])> = qs
        .iter()
        .zip(&field)
        .map(|(q, f)| (*f, group.reference_section(p, q)))
        .collect();
    let sign = majority_sign(&sections);
    let max_section_angle = sections
        .iter()
        .map(|(f, s)| (sign * dot(f, s)).clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max);

    let recovered = recover_lie_algebra(w, group, qs)?;
    let directions = recovered
        .iter()
        .zip(reference_lie_algebra(p, group, qs))
        .map(|(xi, r)| Ok((unit(xi.0)?, unit(r.0)?)))
        .collect::<Result<Vec<_>>>()?;
    let sign = majority_sign(&directions);
    let squared: f64 = directions
        .iter()
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - sign * y).powi(2)).sum::<f64>())
        .sum();
    let lie_algebra_rms_error = (squared / (3.0 * n)).sqrt();

    Ok(FieldMetrics {
        points: qs.len(),
        mean_abs_components,
        max_section_angle,
        lie_algebra_rms_error,
        vertical_residual: vertical_residual(w, p, group, qs)?,
    })
}
