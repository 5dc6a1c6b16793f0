//! Ground-truth trajectories, noisy INS/ADCP logs, and the dead-reckoning baseline.

mod dead_reckoning;
mod sensors;
mod trajectory;

pub use dead_reckoning::dead_reckon;
pub use sensors::{simulate_sensors, GaussMarkov};
pub use trajectory::{generate_trajectory, Lawnmower, TrajectoryParams};

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::geometry::{wrap_angle, Vec2};

/// Standard gravity used for milli-g conversions (m/s^2).
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Planar vehicle state: inertial position, inertial velocity, CCW heading from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
}

impl RobotState {
    pub const DIM: usize = 5;

    pub fn new(position: Vec2, velocity: Vec2, heading: f64) -> Self {
        Self { position, velocity, heading: wrap_angle(heading) }
    }

    pub fn to_vector(&self) -> SVector<f64, 5> {
        SVector::<f64, 5>::new(
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
            self.heading,
        )
    }

    /// Builds a state from `[x, y, vx, vy, psi]` without wrapping the heading.
    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            position: Vec2::new(v[0], v[1]),
            velocity: Vec2::new(v[2], v[3]),
            heading: v[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedState {
    pub t: f64,
    pub state: RobotState,
}

/// Body-frame specific acceleration and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsSample {
    pub t: f64,
    pub accel: Vec2,
    pub yaw_rate: f64,
}

/// Flow velocity relative to the vehicle, in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcpSample {
    pub t: f64,
    pub rel_flow: Vec2,
}

/// White noise density plus a first-order Gauss-Markov bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNoise {
    /// Channel units per sqrt(Hz).
    pub white_density: f64,
    /// Steady-state standard deviation of the bias (channel units).
    pub bias_sd: f64,
    /// Bias correlation time (s).
    pub bias_tau: f64,
}

impl ChannelNoise {
    pub const ZERO: ChannelNoise = ChannelNoise { white_density: 0.0, bias_sd: 0.0, bias_tau: 1.0 };

    pub fn white_only(density: f64) -> Self {
        Self { white_density: density, ..Self::ZERO }
    }

    /// Per-sample white-noise standard deviation at `rate_hz`.
    pub fn sample_sd(&self, rate_hz: f64) -> f64 {
        self.white_density * rate_hz.sqrt()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.white_density >= 0.0 && self.bias_sd >= 0.0) {
            return Err(FlamError::config(format!("{name} noise levels must be nonnegative")));
        }
        if self.bias_sd > 0.0 && !(self.bias_tau > 0.0) {
            return Err(FlamError::config(format!("{name} bias correlation time must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsNoiseSpec {
    pub rate_hz: f64,
    /// m/s^2 channels.
    pub accel: ChannelNoise,
    /// rad/s channel.
    pub gyro: ChannelNoise,
}

impl InsNoiseSpec {
    /// Consumer/industrial-grade MEMS unit sampled at `rate_hz`:
    /// 0.14 mg/sqrt(Hz) and 0.04 mg bias (300 s) on the accelerometers,
    /// 0.0035 deg/s/sqrt(Hz) and 10 deg/hr bias (300 s) on the gyro.
    pub fn consumer_grade(rate_hz: f64) -> Self {
        let mg = 1e-3 * STANDARD_GRAVITY;
        Self {
            rate_hz,
            accel: ChannelNoise { white_density: 0.14 * mg, bias_sd: 0.04 * mg, bias_tau: 300.0 },
            gyro: ChannelNoise {
                white_density: 0.0035f64.to_radians(),
                bias_sd: (10.0f64 / 3600.0).to_radians(),
                bias_tau: 300.0,
            },
        }
    }

    pub fn noiseless(rate_hz: f64) -> Self {
        Self { rate_hz, accel: ChannelNoise::ZERO, gyro: ChannelNoise::ZERO }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcpNoiseSpec {
    pub rate_hz: f64,
    /// m/s channels.
    pub rel_flow: ChannelNoise,
}

impl AdcpNoiseSpec {
    /// 0.01 m/s measurement noise and 0.01 m/s bias (100 s).
    pub fn doppler_profiler(rate_hz: f64) -> Self {
        Self {
            rate_hz,
            rel_flow: ChannelNoise {
                white_density: 0.01 / rate_hz.sqrt(),
                bias_sd: 0.01,
                bias_tau: 100.0,
            },
        }
    }

    pub fn noiseless(rate_hz: f64) -> Self {
        Self { rate_hz, rel_flow: ChannelNoise::ZERO }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    pub ins: InsNoiseSpec,
    pub adcp: AdcpNoiseSpec,
}

impl SensorNoise {
    pub fn default_profile() -> Self {
        Self { ins: InsNoiseSpec::consumer_grade(10.0), adcp: AdcpNoiseSpec::doppler_profiler(1.0) }
    }

    pub fn noiseless() -> Self {
        Self { ins: InsNoiseSpec::noiseless(10.0), adcp: AdcpNoiseSpec::noiseless(1.0) }
    }

    pub fn ins_dt(&self) -> f64 {
        1.0 / self.ins.rate_hz
    }

    /// INS samples per ADCP sample.
    pub fn adcp_stride(&self) -> Result<usize> {
        let ratio = self.ins.rate_hz / self.adcp.rate_hz;
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 {
            return Err(FlamError::config("ADCP rate must divide the INS rate"));
        }
        Ok(stride as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ins.rate_hz > 0.0 && self.adcp.rate_hz > 0.0) {
            return Err(FlamError::config("sensor rates must be positive"));
        }
        self.ins.accel.validate("accelerometer")?;
        self.ins.gyro.validate("gyro")?;
        self.adcp.rel_flow.validate("ADCP")?;
        self.adcp_stride()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLog {
    /// INS samples at steps `1..=K`; sample `k` links states `k-1` and `k`.
    pub ins: Vec<InsSample>,
    pub adcp: Vec<AdcpSample>,
    /// True states at steps `0..=K`.
    pub truth: Vec<TimedState>,
    pub noise: SensorNoise,
}

impl SensorLog {
    pub fn dt(&self) -> f64 {
        self.noise.ins_dt()
    }

    /// Time of state 0.
    pub fn start_time(&self) -> f64 {
        match (self.truth.first(), self.ins.first()) {
            (Some(s), _) => s.t,
            (None, Some(u)) => u.t - self.dt(),
            (None, None) => 0.0,
        }
    }

    pub fn state_count(&self) -> usize {
        self.ins.len() + 1
    }

    /// State index of a timestamp on the INS clock.
    pub fn step_index(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start_time()) / self.dt()).round();
        if k < 0.0 || k as usize > self.ins.len() {
            return None;
        }
        let k = k as usize;
        let stamp = if k == 0 { self.start_time() } else { self.ins[k - 1].t };
        ((stamp - t).abs() <= 1e-6 * self.dt()).then_some(k)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.ins.is_empty() {
            return Err(FlamError::EmptyLog);
        }
        if let Some(i) = self.ins.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(FlamError::TimestampMismatch { index: i + 1 });
        }
        if !self.truth.is_empty() && self.truth.len() != self.ins.len() + 1 {
            return Err(FlamError::DimensionMismatch { expected: self.ins.len() + 1, actual: self.truth.len() });
        }
        for (i, z) in self.adcp.iter().enumerate() {
            if self.step_index(z.t).is_none() {
                return Err(FlamError::TimestampMismatch { index: i });
            }
        }
        Ok(())
    }
}
