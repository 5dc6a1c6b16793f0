use rand::Rng;
use rand_distr::StandardNormal;

use super::{AdcpSample, ChannelNoise, InsSample, SensorLog, SensorNoise, TimedState};
use crate::error::{FlamError, Result};
use crate::flow_models::FlowField;
use crate::geometry::{rotation_to_body, wrap_angle, Vec2};
use crate::rng::{self, Stream};

/// First-order Gauss-Markov process started from its stationary distribution.
#[derive(Debug, Clone, Copy)]
pub struct GaussMarkov {
    value: f64,
    sd: f64,
    tau: f64,
}

impl GaussMarkov {
    pub fn new<R: Rng>(sd: f64, tau: f64, rng: &mut R) -> Self {
        let value = if sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        Self { value, sd, tau }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn step<R: Rng>(&mut self, dt: f64, rng: &mut R) -> f64 {
        if self.sd > 0.0 {
            let phi = (-dt / self.tau).exp();
            let drive = self.sd * (1.0 - phi * phi).sqrt();
            self.value = phi * self.value + drive * rng.sample::<f64, _>(StandardNormal);
        }
        self.value
    }
}

struct Channel {
    bias: GaussMarkov,
    white_sd: f64,
}

impl Channel {
    fn new<R: Rng>(noise: &ChannelNoise, rate_hz: f64, rng: &mut R) -> Self {
        Self {
            bias: GaussMarkov::new(noise.bias_sd, noise.bias_tau, rng),
            white_sd: noise.sample_sd(rate_hz),
        }
    }

    fn corrupt<R: Rng>(&mut self, value: f64, dt: f64, rng: &mut R) -> f64 {
        let bias = self.bias.step(dt, rng);
        let white = if self.white_sd > 0.0 { self.white_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        value + bias + white
    }
}

/// Simulates INS samples for steps `1..=K` and ADCP samples every
/// `ins_rate / adcp_rate` steps from the true trajectory and the analytic flow.
pub fn simulate_sensors(
    truth: &[TimedState],
    flow: &FlowField,
    noise: &SensorNoise,
    seed: u64,
) -> Result<SensorLog> {
    noise.validate()?;
    if truth.is_empty() {
        return Err(FlamError::EmptyLog);
    }
    let dt = noise.ins_dt();
    for (i, w) in truth.windows(2).enumerate() {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(FlamError::TimestampMismatch { index: i + 1 });
        }
    }
    let stride = noise.adcp_stride()?;

    let mut ins_rng = rng::stream(seed, Stream::Ins);
    let mut accel = [
        Channel::new(&noise.ins.accel, noise.ins.rate_hz, &mut ins_rng),
        Channel::new(&noise.ins.accel, noise.ins.rate_hz, &mut ins_rng),
    ];
    let mut gyro = Channel::new(&noise.ins.gyro, noise.ins.rate_hz, &mut ins_rng);

    let mut adcp_rng = rng::stream(seed, Stream::Adcp);
    let mut rel = [
        Channel::new(&noise.adcp.rel_flow, noise.adcp.rate_hz, &mut adcp_rng),
        Channel::new(&noise.adcp.rel_flow, noise.adcp.rate_hz, &mut adcp_rng),
    ];
    let adcp_dt = stride as f64 * dt;

    let mut ins = Vec::with_capacity(truth.len().saturating_sub(1));
    let mut adcp = Vec::with_capacity(truth.len() / stride);
    for (k, w) in truth.windows(2).enumerate() {
        let (prev, cur) = (&w[0].state, &w[1].state);
        let r = rotation_to_body(cur.heading);
        let a = r * (cur.velocity - prev.velocity) / dt;
        let yaw_rate = wrap_angle(cur.heading - prev.heading) / dt;
        ins.push(InsSample {
            t: w[1].t,
            accel: Vec2::new(
                accel[0].corrupt(a.x, dt, &mut ins_rng),
                accel[1].corrupt(a.y, dt, &mut ins_rng),
            ),
            yaw_rate: gyro.corrupt(yaw_rate, dt, &mut ins_rng),
        });

        let step = k + 1;
        if step % stride == 0 {
            let v_flow = flow.velocity(&cur.position, w[1].t)?;
            let z = r * (v_flow - cur.velocity);
            adcp.push(AdcpSample {
                t: w[1].t,
                rel_flow: Vec2::new(
                    rel[0].corrupt(z.x, adcp_dt, &mut adcp_rng),
                    rel[1].corrupt(z.y, adcp_dt, &mut adcp_rng),
                ),
            });
        }
    }
    Ok(SensorLog { ins, adcp, truth: truth.to_vec(), noise: *noise })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_models::{FlowFieldSpec, GyreParams};
    use crate::geometry::Rect;
    use crate::sim::{generate_trajectory, RobotState, TrajectoryParams};
    use rand::SeedableRng;

    fn case1_truth() -> Vec<TimedState> {
        let p = TrajectoryParams {
            start: [2.0, 8.0],
            heading: -std::f64::consts::FRAC_PI_2,
            v_max: 2.0,
            duration: 60.0,
            dt: 0.1,
            lane_spacing: 2.0,
        };
        generate_trajectory(&Rect::from_size(10.0, 10.0), &p).unwrap()
    }

    #[test]
    fn noiseless_ins_is_exact_discrete_kinematics() {
        let truth = case1_truth();
        let flow = FlowField::new(&FlowFieldSpec::single_gyre(GyreParams::default())).unwrap();
        let log = simulate_sensors(&truth, &flow, &SensorNoise::noiseless(), 1).unwrap();
        assert_eq!(log.ins.len(), truth.len() - 1);
        assert_eq!(log.adcp.len(), 60);
        assert!((log.adcp[0].t - 1.0).abs() < 1e-12);
        for (k, u) in log.ins.iter().enumerate() {
            let (a, b) = (&truth[k].state, &truth[k + 1].state);
            let expected = rotation_to_body(b.heading) * (b.velocity - a.velocity) / 0.1;
            assert!((u.accel - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn drifting_with_uniform_flow_gives_zero_relative_flow() {
        let v = Vec2::new(0.3, -0.1);
        let truth: Vec<TimedState> = (0..=50)
            .map(|k| {
                let t = k as f64 * 0.1;
                TimedState { t, state: RobotState::new(Vec2::new(1.0, 1.0) + v * t, v, 0.7) }
            })
            .collect();
        let flow = FlowField::new(&FlowFieldSpec::uniform(v, Rect::from_size(10.0, 10.0))).unwrap();
        let log = simulate_sensors(&truth, &flow, &SensorNoise::noiseless(), 3).unwrap();
        assert_eq!(log.adcp.len(), 5);
        for z in &log.adcp {
            assert!(z.rel_flow.norm() < 1e-15);
        }
    }

    #[test]
    fn white_noise_variance_matches_spec() {
        let truth: Vec<TimedState> = (0..=100_000)
            .map(|k| TimedState { t: k as f64 * 0.1, state: RobotState::new(Vec2::new(5.0, 5.0), Vec2::zeros(), 0.0) })
            .collect();
        let flow = FlowField::new(&FlowFieldSpec::uniform(Vec2::zeros(), Rect::from_size(10.0, 10.0))).unwrap();
        let mut noise = SensorNoise::noiseless();
        noise.adcp.rel_flow = ChannelNoise::white_only(0.02);
        let log = simulate_sensors(&truth, &flow, &noise, 17).unwrap();
        assert_eq!(log.adcp.len(), 10_000);
        let var = log.adcp.iter().map(|z| z.rel_flow.x * z.rel_flow.x).sum::<f64>() / log.adcp.len() as f64;
        assert!((var / 4e-4 - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn gauss_markov_correlation_time() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (tau, dt) = (10.0, 0.1);
        let mut gm = GaussMarkov::new(1.0, tau, &mut rng);
        let xs: Vec<f64> = (0..400_000).map(|_| gm.step(dt, &mut rng)).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        let lag = (tau / dt) as usize;
        let cov = xs.iter().zip(&xs[lag..]).map(|(a, b)| a * b).sum::<f64>() / (xs.len() - lag) as f64;
        // autocorrelation at lag tau is 1/e; invert for the empirical time constant
        let tau_hat = -(lag as f64 * dt) / (cov / var).ln();
        assert!((tau_hat / tau - 1.0).abs() < 0.2, "tau_hat {tau_hat}");
        assert!((var - 1.0).abs() < 0.2);
    }

    #[test]
    fn reproducible_for_seed() {
        let truth = case1_truth();
        let flow = FlowField::new(&FlowFieldSpec::single_gyre(GyreParams::default())).unwrap();
        let a = simulate_sensors(&truth, &flow, &SensorNoise::default_profile(), 7).unwrap();
        let b = simulate_sensors(&truth, &flow, &SensorNoise::default_profile(), 7).unwrap();
        let c = simulate_sensors(&truth, &flow, &SensorNoise::default_profile(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
