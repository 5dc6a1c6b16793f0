use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::geometry::{Rect, Vec2};

/// Queries this far outside a domain are clamped onto it instead of rejected.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Parameters of the closed-form double-gyre stream function
/// `psi = A sin(pi g(x, t)) sin(pi y)` on the nondimensional box `[0, 2] x [0, 1]`,
/// with `g = a(t) x^2 + b(t) x`, `a = eps sin(w t)`, `b = 1 - 2 eps sin(w t)`.
///
/// Physical coordinates are divided by `length_scale` before evaluation;
/// velocities are returned unscaled (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyreParams {
    pub amplitude: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub length_scale: f64,
}

impl Default for GyreParams {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            epsilon: 0.25,
            omega: 2.0 * PI / 10.0,
            length_scale: 10.0,
        }
    }
}

impl GyreParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(FlamError::config("gyre amplitude must be positive"));
        }
        if !(self.length_scale > 0.0) {
            return Err(FlamError::config("gyre length scale must be positive"));
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(FlamError::config("gyre epsilon must lie in [0, 0.5]"));
        }
        if !self.omega.is_finite() {
            return Err(FlamError::config("gyre omega must be finite"));
        }
        Ok(())
    }

    pub fn single_domain(&self) -> Rect {
        Rect::from_size(self.length_scale, self.length_scale)
    }

    pub fn double_domain(&self) -> Rect {
        Rect::from_size(2.0 * self.length_scale, self.length_scale)
    }

    fn g_coeffs(&self, t: f64) -> (f64, f64) {
        let s = self.epsilon * (self.omega * t).sin();
        (s, 1.0 - 2.0 * s)
    }

    /// Nondimensional stream function at physical position `p`.
    pub fn stream_function(&self, p: &Vec2, t: f64) -> f64 {
        let (x, y) = (p.x / self.length_scale, p.y / self.length_scale);
        let (a, b) = self.g_coeffs(t);
        let g = a * x * x + b * x;
        self.amplitude * (PI * g).sin() * (PI * y).sin()
    }

    /// Velocity of the nondimensional field at `p / L`, without domain checks.
    pub fn velocity_unchecked(&self, p: &Vec2, t: f64) -> Vec2 {
        let (x, y) = (p.x / self.length_scale, p.y / self.length_scale);
        let (a, b) = self.g_coeffs(t);
        let g = a * x * x + b * x;
        let dg = 2.0 * a * x + b;
        let (sg, cg) = (PI * g).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        let amp = PI * self.amplitude;
        Vec2::new(-amp * sg * cy, amp * cg * sy * dg)
    }
}

fn checked(domain: Rect, p: &Vec2) -> Result<Vec2> {
    if domain.contains(p, DOMAIN_SLACK) {
        Ok(domain.clamp(p))
    } else {
        Err(FlamError::OutOfDomain { x: p.x, y: p.y })
    }
}

/// Left half of the double gyre at t = 0, on `[0, L] x [0, L]`.
pub fn single_gyre_velocity(p: &Vec2, params: &GyreParams) -> Result<Vec2> {
    let q = checked(params.single_domain(), p)?;
    Ok(params.velocity_unchecked(&q, 0.0))
}

/// Double gyre on `[0, 2L] x [0, L]`.
pub fn double_gyre_velocity(p: &Vec2, t: f64, params: &GyreParams) -> Result<Vec2> {
    let q = checked(params.double_domain(), p)?;
    Ok(params.velocity_unchecked(&q, t))
}
