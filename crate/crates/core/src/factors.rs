//! Motion and observation factors of the FLAM cost.
//!
//! Both residuals follow the `measurement - prediction` convention. The motion
//! factor uses the vehicle's velocity state as a zero-valued pseudo input that
//! softly enforces `v_k = (x_k - x_{k-1}) / dt`.

use nalgebra::{DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::flow_map::{locate_cell, CellWeights, FlowMap, GridSpec};
use crate::geometry::{rotation_to_body_derivative, wrap_angle, Mat2, Vec2};
use crate::sim::{AdcpSample, InsSample, RobotState, SensorLog};

pub use crate::geometry::rotation_to_body;

pub type MotionResidual = SVector<f64, 5>;
pub type MotionJacobian = SMatrix<f64, 5, 10>;
pub type ObservationJacobian = SMatrix<f64, 2, 13>;

pub fn motion_residual(prev: &RobotState, cur: &RobotState, u: &InsSample, dt: f64) -> MotionResidual {
    let ev = cur.velocity - (cur.position - prev.position) / dt;
    let ea = u.accel - rotation_to_body(cur.heading) * (cur.velocity - prev.velocity) / dt;
    let er = u.yaw_rate - wrap_angle(cur.heading - prev.heading) / dt;
    MotionResidual::new(ev.x, ev.y, ea.x, ea.y, er)
}

/// Jacobian of [`motion_residual`] with respect to `[prev; cur]`, each laid
/// out as `[x, y, vx, vy, psi]`.
pub fn motion_jacobian(prev: &RobotState, cur: &RobotState, _u: &InsSample, dt: f64) -> MotionJacobian {
    let inv = 1.0 / dt;
    let r = rotation_to_body(cur.heading);
    let dr = rotation_to_body_derivative(cur.heading) * (cur.velocity - prev.velocity) * inv;
    let mut f = MotionJacobian::zeros();
    f.fixed_view_mut::<2, 2>(0, 0).copy_from(&(Mat2::identity() * inv));
    f.fixed_view_mut::<2, 2>(0, 5).copy_from(&(Mat2::identity() * -inv));
    f.fixed_view_mut::<2, 2>(0, 7).copy_from(&Mat2::identity());
    f.fixed_view_mut::<2, 2>(2, 2).copy_from(&(r * inv));
    f.fixed_view_mut::<2, 2>(2, 7).copy_from(&(r * -inv));
    f.fixed_view_mut::<2, 1>(2, 9).copy_from(&(-dr));
    f[(4, 4)] = inv;
    f[(4, 9)] = -inv;
    f
}

fn observation_eval(
    x: &RobotState,
    map: &FlowMap,
    cw: &CellWeights,
    z: &Vec2,
) -> (Vec2, ObservationJacobian) {
    let r = rotation_to_body(x.heading);
    let flow = map.blend(cw);
    let rel = flow - x.velocity;
    let e = z - r * rel;

    let grads = cw.gradients(&map.grid);
    let mut dflow = Mat2::zeros();
    for (i, &node) in cw.node_indices.iter().enumerate() {
        for axis in 0..2 {
            dflow.set_column(axis, &(dflow.column(axis) + map.node_velocities[node] * grads[i][axis]));
        }
    }

    let mut h = ObservationJacobian::zeros();
    h.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-r * dflow));
    h.fixed_view_mut::<2, 2>(0, 2).copy_from(&r);
    h.fixed_view_mut::<2, 1>(0, 4).copy_from(&(-rotation_to_body_derivative(x.heading) * rel));
    for (i, &w) in cw.weights.iter().enumerate() {
        h.fixed_view_mut::<2, 2>(0, 5 + 2 * i).copy_from(&(-r * w));
    }
    (e, h)
}

/// `z - R(psi) (v_flow(p) - v)` with the flow interpolated from the cell boxing `x`.
pub fn observation_residual(x: &RobotState, map: &FlowMap, z: &AdcpSample) -> Result<Vec2> {
    let cw = locate_cell(&map.grid, &x.position)?;
    Ok(observation_eval(x, map, &cw, &z.rel_flow).0)
}

/// Jacobian of [`observation_residual`] with respect to
/// `[x, y, vx, vy, psi, v_11, v_21, v_12, v_22]`.
pub fn observation_jacobian(x: &RobotState, map: &FlowMap, z: &AdcpSample) -> Result<ObservationJacobian> {
    let cw = locate_cell(&map.grid, &x.position)?;
    Ok(observation_eval(x, map, &cw, &z.rel_flow).1)
}

/// Standard deviations behind the (diagonal) factor covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorWeights {
    /// Pseudo-input velocity consistency (m/s).
    pub sigma_v: f64,
    /// Acceleration per sample (m/s^2).
    pub sigma_a: f64,
    /// Yaw rate per sample (rad/s).
    pub sigma_r: f64,
    /// Relative flow per sample (m/s).
    pub sigma_z: f64,
}

impl FactorWeights {
    pub fn motion_information(&self) -> SVector<f64, 5> {
        let (v, a, r) = (self.sigma_v.powi(-2), self.sigma_a.powi(-2), self.sigma_r.powi(-2));
        SVector::<f64, 5>::new(v, v, a, a, r)
    }

    pub fn observation_information(&self) -> f64 {
        self.sigma_z.powi(-2)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma_v, self.sigma_a, self.sigma_r, self.sigma_z];
        if all.iter().all(|s| *s > 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(FlamError::config("factor standard deviations must be positive and finite"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionFactor {
    /// Index of the later state; the factor links `step - 1` and `step`.
    pub step: usize,
    pub input: InsSample,
}

impl MotionFactor {
    pub fn residual(&self, states: &[RobotState], dt: f64) -> MotionResidual {
        motion_residual(&states[self.step - 1], &states[self.step], &self.input, dt)
    }

    pub fn jacobian(&self, states: &[RobotState], dt: f64) -> MotionJacobian {
        motion_jacobian(&states[self.step - 1], &states[self.step], &self.input, dt)
    }
}

/// Relative-flow observation with a frozen cell assignment. The flow is the
/// assigned cell's bilinear polynomial evaluated at the estimated position,
/// even if the estimate has drifted out of that cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationFactor {
    pub step: usize,
    pub z: Vec2,
    pub cell: (usize, usize),
}

impl ObservationFactor {
    pub fn evaluate(&self, x: &RobotState, map: &FlowMap) -> (Vec2, ObservationJacobian, [usize; 4]) {
        let cw = map.grid.cell_weights(self.cell, &x.position);
        let (e, h) = observation_eval(x, map, &cw, &self.z);
        (e, h, cw.node_indices)
    }

    pub fn residual(&self, x: &RobotState, map: &FlowMap) -> Vec2 {
        self.evaluate(x, map).0
    }
}

/// The optimization variable: every robot state and every node velocity.
/// Vector layout is `[x_0, ..., x_K, v_1, ..., v_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub states: Vec<RobotState>,
    pub map: FlowMap,
}

impl FullState {
    pub fn dim(&self) -> usize {
        RobotState::DIM * self.states.len() + 2 * self.map.node_velocities.len()
    }

    pub fn state_offset(&self, k: usize) -> usize {
        RobotState::DIM * k
    }

    pub fn node_offset(&self, i: usize) -> usize {
        RobotState::DIM * self.states.len() + 2 * i
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for (k, s) in self.states.iter().enumerate() {
            v.fixed_rows_mut::<5>(self.state_offset(k)).copy_from(&s.to_vector());
        }
        for (i, n) in self.map.node_velocities.iter().enumerate() {
            v.fixed_rows_mut::<2>(self.node_offset(i)).copy_from(n);
        }
        v
    }

    /// `y += delta`, re-wrapping headings.
    pub fn apply_increment(&mut self, delta: &DVector<f64>) -> Result<()> {
        if delta.len() != self.dim() {
            return Err(FlamError::DimensionMismatch { expected: self.dim(), actual: delta.len() });
        }
        let n_states = self.states.len();
        for (k, s) in self.states.iter_mut().enumerate() {
            let d = delta.fixed_rows::<5>(RobotState::DIM * k);
            s.position += Vec2::new(d[0], d[1]);
            s.velocity += Vec2::new(d[2], d[3]);
            s.heading = wrap_angle(s.heading + d[4]);
        }
        for (i, n) in self.map.node_velocities.iter_mut().enumerate() {
            *n += delta.fixed_rows::<2>(RobotState::DIM * n_states + 2 * i);
        }
        Ok(())
    }
}

/// Freezes the cell of every ADCP sample using the true trajectory. Samples
/// taken outside the grid hull are dropped and counted.
pub fn associate(log: &SensorLog, grid: &GridSpec) -> Result<(Vec<ObservationFactor>, usize)> {
    if log.truth.len() != log.state_count() {
        return Err(FlamError::config("data association needs the true trajectory in the log"));
    }
    let mut observations = Vec::with_capacity(log.adcp.len());
    let mut dropped = 0;
    for (i, z) in log.adcp.iter().enumerate() {
        let step = log.step_index(z.t).ok_or(FlamError::TimestampMismatch { index: i })?;
        match grid.cell_of(&log.truth[step].state.position) {
            Ok(cell) => observations.push(ObservationFactor { step, z: z.rel_flow, cell }),
            Err(_) => dropped += 1,
        }
    }
    Ok((observations, dropped))
}

/// Factors of one FLAM problem, built once from a sensor log.
#[derive(Debug, Clone)]
pub struct FlamProblem {
    pub dt: f64,
    pub grid: GridSpec,
    pub motion: Vec<MotionFactor>,
    pub observations: Vec<ObservationFactor>,
    pub weights: FactorWeights,
    /// Observations discarded because the vehicle was outside the grid hull.
    pub dropped_observations: usize,
}

impl FlamProblem {
    /// Cell assignment uses the true positions in `log.truth`: data association
    /// is assumed known.
    pub fn from_log(log: &SensorLog, grid: &GridSpec, weights: FactorWeights) -> Result<Self> {
        log.validate()?;
        weights.validate()?;
        grid.validate()?;
        let motion = log
            .ins
            .iter()
            .enumerate()
            .map(|(i, u)| MotionFactor { step: i + 1, input: *u })
            .collect();
        let (observations, dropped) = associate(log, grid)?;
        Ok(Self { dt: log.dt(), grid: *grid, motion, observations, weights, dropped_observations: dropped })
    }

    pub fn state_count(&self) -> usize {
        self.motion.len() + 1
    }

    pub fn check_state(&self, y: &FullState) -> Result<()> {
        if y.states.len() != self.state_count() {
            return Err(FlamError::DimensionMismatch { expected: self.state_count(), actual: y.states.len() });
        }
        if y.map.grid != self.grid {
            return Err(FlamError::GridMismatch);
        }
        Ok(())
    }

    /// `sum e^T W e` over all factors.
    pub fn cost(&self, y: &FullState) -> f64 {
        let wm = self.weights.motion_information();
        let wz = self.weights.observation_information();
        let motion: f64 = self
            .motion
            .iter()
            .map(|f| {
                let e = f.residual(&y.states, self.dt);
                e.component_mul(&e).dot(&wm)
            })
            .sum();
        let obs: f64 = self
            .observations
            .iter()
            .map(|f| f.residual(&y.states[f.step], &y.map).norm_squared() * wz)
            .sum();
        motion + obs
    }
}
