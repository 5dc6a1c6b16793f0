use super::{RobotState, SensorLog, TimedState};
use crate::error::{FlamError, Result};
use crate::geometry::{rotation_to_body, wrap_angle};

/// Forward-Euler integration of the INS log from a known initial state:
/// heading first, then velocity with the new heading, then position.
pub fn dead_reckon(log: &SensorLog, x0: &RobotState) -> Result<Vec<TimedState>> {
    if log.ins.is_empty() {
        return Err(FlamError::EmptyLog);
    }
    let dt = log.dt();
    let mut out = Vec::with_capacity(log.ins.len() + 1);
    let mut x = *x0;
    out.push(TimedState { t: log.start_time(), state: x });
    for u in &log.ins {
        let heading = wrap_angle(x.heading + u.yaw_rate * dt);
        let velocity = x.velocity + rotation_to_body(heading).transpose() * u.accel * dt;
        let position = x.position + velocity * dt;
        x = RobotState { position, velocity, heading };
        out.push(TimedState { t: u.t, state: x });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::sim::{InsSample, SensorNoise};

    fn log_from(ins: Vec<InsSample>) -> SensorLog {
        SensorLog { ins, adcp: vec![], truth: vec![], noise: SensorNoise::noiseless() }
    }

    #[test]
    fn empty_log_is_error() {
        let x0 = RobotState::new(Vec2::zeros(), Vec2::zeros(), 0.0);
        assert!(matches!(dead_reckon(&log_from(vec![]), &x0), Err(FlamError::EmptyLog)));
    }

    #[test]
    fn constant_bias_grows_quadratically() {
        let b = 1e-3;
        let dt = 0.1;
        let n = 3000;
        let ins = (1..=n)
            .map(|k| InsSample { t: k as f64 * dt, accel: Vec2::new(b, 0.0), yaw_rate: 0.0 })
            .collect();
        let x0 = RobotState::new(Vec2::zeros(), Vec2::zeros(), 0.0);
        let dr = dead_reckon(&log_from(ins), &x0).unwrap();
        for &k in &[500usize, 1000, 3000] {
            let t = k as f64 * dt;
            let closed = 0.5 * b * t * t;
            let err = dr[k].state.position.x;
            assert!((err / closed - 1.0).abs() < 0.01, "k {k}: {err} vs {closed}");
        }
    }
}
