//! Trajectory, velocity and flow-map error summaries.

use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::factors::{FlamProblem, FullState};
use crate::flow_map::FlowMap;
use crate::sim::TimedState;
use crate::solver::IterationDiagnostics;

/// Root of the mean of squares; zero for an empty slice.
pub fn rmse(norms: &[f64]) -> f64 {
    if norms.is_empty() {
        return 0.0;
    }
    (norms.iter().map(|e| e * e).sum::<f64>() / norms.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryErrors {
    pub t: Vec<f64>,
    /// Euclidean position error per step (m).
    pub position: Vec<f64>,
    /// Euclidean inertial velocity error per step (m/s).
    pub velocity: Vec<f64>,
    pub position_rmse: f64,
    pub velocity_rmse: f64,
    pub terminal_position: f64,
}

pub fn trajectory_errors(estimate: &[TimedState], truth: &[TimedState]) -> Result<TrajectoryErrors> {
    if estimate.len() != truth.len() {
        return Err(FlamError::DimensionMismatch { expected: truth.len(), actual: estimate.len() });
    }
    if truth.is_empty() {
        return Err(FlamError::EmptyLog);
    }
    let mut out = TrajectoryErrors {
        t: Vec::with_capacity(truth.len()),
        position: Vec::with_capacity(truth.len()),
        velocity: Vec::with_capacity(truth.len()),
        position_rmse: 0.0,
        velocity_rmse: 0.0,
        terminal_position: 0.0,
    };
    for (i, (e, g)) in estimate.iter().zip(truth).enumerate() {
        if (e.t - g.t).abs() > 1e-9 * g.t.abs().max(1.0) {
            return Err(FlamError::TimestampMismatch { index: i });
        }
        out.t.push(g.t);
        out.position.push((e.state.position - g.state.position).norm());
        out.velocity.push((e.state.velocity - g.state.velocity).norm());
    }
    out.position_rmse = rmse(&out.position);
    out.velocity_rmse = rmse(&out.velocity);
    out.terminal_position = *out.position.last().expect("non-empty");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapErrors {
    /// Velocity error norm per node (m/s), in node-id order.
    pub node: Vec<f64>,
    pub boundary: Vec<bool>,
    pub rmse: f64,
    pub interior_rmse: f64,
    pub boundary_rmse: f64,
}

pub fn map_errors(estimated: &FlowMap, truth: &FlowMap) -> Result<MapErrors> {
    if estimated.grid != truth.grid || estimated.node_velocities.len() != truth.node_velocities.len() {
        return Err(FlamError::GridMismatch);
    }
    let grid = &truth.grid;
    let node: Vec<f64> = estimated
        .node_velocities
        .iter()
        .zip(&truth.node_velocities)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let boundary: Vec<bool> = (0..grid.node_count()).map(|i| grid.is_boundary(i)).collect();
    let pick = |want: bool| -> Vec<f64> {
        node.iter().zip(&boundary).filter(|(_, &b)| b == want).map(|(e, _)| *e).collect()
    };
    Ok(MapErrors {
        rmse: rmse(&node),
        interior_rmse: rmse(&pick(false)),
        boundary_rmse: rmse(&pick(true)),
        node,
        boundary,
    })
}

/// Fraction of interior nodes where the sign of the v-component matches the truth.
/// Nodes whose true v is within `dead_band` of zero are skipped.
pub fn interior_v_sign_agreement(estimated: &FlowMap, truth: &FlowMap, dead_band: f64) -> Result<f64> {
    if estimated.grid != truth.grid {
        return Err(FlamError::GridMismatch);
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in 0..truth.grid.node_count() {
        let v_true = truth.node_velocities[i].y;
        if truth.grid.is_boundary(i) || v_true.abs() <= dead_band {
            continue;
        }
        total += 1;
        if estimated.node_velocities[i].y.signum() == v_true.signum() {
            hits += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

/// Post-fit residual levels of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub cost: f64,
    pub motion_cost: f64,
    pub observation_cost: f64,
    /// RMS of the unweighted relative-flow residual norms (m/s).
    pub observation_rms: f64,
}

pub fn residual_summary(problem: &FlamProblem, y: &FullState) -> ResidualSummary {
    let info = problem.weights.motion_information();
    let motion_cost: f64 = problem
        .motion
        .iter()
        .map(|f| {
            let e = f.residual(&y.states, problem.dt);
            e.component_mul(&e).dot(&info)
        })
        .sum();
    let norms: Vec<f64> = problem
        .observations
        .iter()
        .map(|f| f.residual(&y.states[f.step], &y.map).norm())
        .collect();
    let observation_cost = problem.weights.observation_information() * norms.iter().map(|e| e * e).sum::<f64>();
    ResidualSummary {
        cost: motion_cost + observation_cost,
        motion_cost,
        observation_cost,
        observation_rms: rmse(&norms),
    }
}

/// Everything `eval` reports for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub dr: TrajectoryErrors,
    pub flam: TrajectoryErrors,
    pub lsf_map: MapErrors,
    pub flam_map: MapErrors,
    pub interior_v_sign_agreement: f64,
    pub residuals: ResidualSummary,
    pub converged: bool,
    pub iterations: Vec<IterationDiagnostics>,
}

impl RunReport {
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("scenario {} seed {}\n", self.scenario, self.seed));
        s.push_str(&format!("{:<24}{:>14}{:>14}\n", "", "DR/LSF", "FLAM"));
        let row = |name: &str, a: f64, b: f64| format!("{name:<24}{a:>14.6}{b:>14.6}\n");
        s.push_str(&row("position RMSE (m)", self.dr.position_rmse, self.flam.position_rmse));
        s.push_str(&row("terminal position (m)", self.dr.terminal_position, self.flam.terminal_position));
        s.push_str(&row("velocity RMSE (m/s)", self.dr.velocity_rmse, self.flam.velocity_rmse));
        s.push_str(&row("map RMSE (m/s)", self.lsf_map.rmse, self.flam_map.rmse));
        s.push_str(&row("map interior RMSE", self.lsf_map.interior_rmse, self.flam_map.interior_rmse));
        s.push_str(&row("map boundary RMSE", self.lsf_map.boundary_rmse, self.flam_map.boundary_rmse));
        s.push_str(&format!(
            "iterations {} converged {} final cost {:.6e} relative-flow residual RMS {:.6e} m/s\n",
            self.iterations.len(),
            self.converged,
            self.residuals.cost,
            self.residuals.observation_rms
        ));
        s
    }
}
