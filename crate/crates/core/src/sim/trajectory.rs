use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{RobotState, TimedState};
use crate::error::{FlamError, Result};
use crate::geometry::{wrap_angle, Rect, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub start: [f64; 2],
    /// Initial heading (rad, CCW from +x). Must be axis aligned.
    pub heading: f64,
    /// Cruise speed (m/s).
    pub v_max: f64,
    pub duration: f64,
    pub dt: f64,
    /// Distance between survey lanes (m); turns are semicircles of half this radius.
    pub lane_spacing: f64,
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Line { from: Vec2, dir: Vec2, len: f64 },
    Arc { center: Vec2, radius: f64, start_angle: f64, ccw: bool },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Line { len, .. } => len,
            Segment::Arc { radius, .. } => PI * radius,
        }
    }

    fn pose(&self, s: f64) -> (Vec2, f64) {
        match *self {
            Segment::Line { from, dir, .. } => (from + dir * s, dir.y.atan2(dir.x)),
            Segment::Arc { center, radius, start_angle, ccw } => {
                let sign = if ccw { 1.0 } else { -1.0 };
                let theta = start_angle + sign * s / radius;
                let p = center + Vec2::new(theta.cos(), theta.sin()) * radius;
                (p, theta + sign * PI / 2.0)
            }
        }
    }
}

/// Closed boustrophedon survey: sweep lanes outward from the start, sweep back,
/// repeat. Lanes are joined by semicircular turns.
#[derive(Debug, Clone)]
pub struct Lawnmower {
    segments: Vec<Segment>,
    cycle_length: f64,
}

impl Lawnmower {
    pub fn new(domain: &Rect, params: &TrajectoryParams) -> Result<Self> {
        let start = Vec2::new(params.start[0], params.start[1]);
        if !domain.contains(&start, 0.0) {
            return Err(FlamError::config("trajectory start lies outside the domain"));
        }
        if !(params.lane_spacing > 0.0) {
            return Err(FlamError::config("lane spacing must be positive"));
        }
        let dir0 = Vec2::new(params.heading.cos(), params.heading.sin());
        let along = if dir0.y.abs() > 1.0 - 1e-9 {
            1
        } else if dir0.x.abs() > 1.0 - 1e-9 {
            0
        } else {
            return Err(FlamError::config("lawnmower start heading must be axis aligned"));
        };
        let cross = 1 - along;
        let axis = |i: usize| if i == 0 { Vec2::x() } else { Vec2::y() };
        let travel = dir0[along].signum();

        // Lanes run between the start and its mirror image across the domain center.
        let s0 = start[along];
        let back_margin = if travel > 0.0 { s0 - domain.min[along] } else { domain.max[along] - s0 };
        let far = if travel > 0.0 { domain.max[along] - back_margin } else { domain.min[along] + back_margin };
        let lane_len = (far - s0) * travel;
        if lane_len <= 0.0 {
            return Err(FlamError::config("start heading points toward the nearer wall; no room for survey lanes"));
        }
        let radius = 0.5 * params.lane_spacing;
        if back_margin < radius - 1e-12 {
            return Err(FlamError::config(format!(
                "turn radius {radius} m exceeds the {back_margin} m margin to the domain wall"
            )));
        }

        let c0 = start[cross];
        let room_plus = domain.max[cross] - c0;
        let room_minus = c0 - domain.min[cross];
        let step_sign = if room_plus >= room_minus { 1.0 } else { -1.0 };
        let span = (room_plus - room_minus).abs();
        let lanes = (span / params.lane_spacing + 1e-9).floor() as usize + 1;
        if lanes < 2 {
            return Err(FlamError::config("domain too narrow for two survey lanes"));
        }

        let lane_start = |i: usize| -> (Vec2, Vec2) {
            let sign = if i % 2 == 0 { travel } else { -travel };
            let c = c0 + step_sign * i as f64 * params.lane_spacing;
            let s = if i % 2 == 0 { s0 } else { far };
            let mut p = Vec2::zeros();
            p[along] = s;
            p[cross] = c;
            (p, axis(along) * sign)
        };

        let order: Vec<usize> = (0..lanes).chain((1..lanes - 1).rev()).collect();
        let mut segments = Vec::with_capacity(2 * order.len());
        for (j, &lane) in order.iter().enumerate() {
            let next = order[(j + 1) % order.len()];
            let (from, dir) = lane_start(lane);
            segments.push(Segment::Line { from, dir, len: lane_len });
            let end = from + dir * lane_len;
            let toward = axis(cross) * step_sign * if next > lane { 1.0 } else { -1.0 };
            let center = end + toward * radius;
            let start_angle = (-toward.y).atan2(-toward.x);
            let ccw = dir.x * toward.y - dir.y * toward.x > 0.0;
            segments.push(Segment::Arc { center, radius, start_angle, ccw });
        }
        let cycle_length = segments.iter().map(Segment::length).sum();
        Ok(Self { segments, cycle_length })
    }

    pub fn cycle_length(&self) -> f64 {
        self.cycle_length
    }

    /// Position and heading after travelling arc length `s`.
    pub fn pose_at(&self, s: f64) -> (Vec2, f64) {
        let mut rem = s.rem_euclid(self.cycle_length);
        for seg in &self.segments {
            let len = seg.length();
            if rem <= len {
                return seg.pose(rem);
            }
            rem -= len;
        }
        let last = self.segments.last().expect("non-empty path");
        last.pose(last.length())
    }
}

/// Constant-speed lawnmower survey sampled every `dt`. Velocities after the
/// first sample are backward differences of position, so the Euler motion
/// model holds exactly on the truth.
pub fn generate_trajectory(domain: &Rect, params: &TrajectoryParams) -> Result<Vec<TimedState>> {
    if !(params.v_max > 0.0) {
        return Err(FlamError::config("v_max must be positive"));
    }
    if !(params.dt > 0.0) || !(params.duration >= 0.0) {
        return Err(FlamError::config("dt must be positive and duration nonnegative"));
    }
    let path = Lawnmower::new(domain, params)?;
    let steps = (params.duration / params.dt).round() as usize;
    let mut out: Vec<TimedState> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * params.dt;
        let (p, heading) = path.pose_at(params.v_max * t);
        let velocity = match out.last() {
            None => Vec2::new(heading.cos(), heading.sin()) * params.v_max,
            Some(prev) => (p - prev.state.position) / params.dt,
        };
        if !domain.contains(&p, 1e-9) {
            return Err(FlamError::config("trajectory leaves the domain"));
        }
        out.push(TimedState { t, state: RobotState::new(p, velocity, wrap_angle(heading)) });
    }
    Ok(out)
}
