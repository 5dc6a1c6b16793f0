//! Gauss-Newton over the full trajectory and flow map, with the linear step
//! solved by damped, block-Jacobi preconditioned conjugate gradient.

mod cg;
mod lsf;
mod sparse;

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::factors::{FactorWeights, FlamProblem, FullState};
use crate::flow_map::GridSpec;
use crate::sim::{AdcpNoiseSpec, ChannelNoise, InsNoiseSpec, RobotState, SensorLog, SensorNoise};

pub use cg::{conjugate_gradient, CgConfig, CgOutcome, Preconditioner};
pub use lsf::{initial_guess, initial_guess_with, lsf_map};
pub use sparse::BlockSparse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnConfig {
    pub max_iterations: usize,
    /// Converged once `max |delta_i|` drops below this.
    pub step_tolerance: f64,
}

impl Default for GnConfig {
    fn default() -> Self {
        Self { max_iterations: 20, step_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub damping: f64,
    /// Levenberg-Marquardt style: reject cost-increasing steps and raise the damping.
    pub adaptive_damping: bool,
    pub anchor_weight: f64,
    pub cg: CgConfig,
    pub gn: GnConfig,
    /// Standard deviation of the velocity pseudo input (m/s).
    pub sigma_v: f64,
    /// Ridge weight of the initial map fit.
    pub lsf_ridge: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            adaptive_damping: false,
            anchor_weight: 1e12,
            cg: CgConfig::default(),
            gn: GnConfig::default(),
            sigma_v: 1e-2,
            lsf_ridge: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.damping >= 0.0
            && self.anchor_weight >= 0.0
            && self.cg.tolerance > 0.0
            && self.gn.step_tolerance > 0.0
            && self.gn.max_iterations > 0
            && self.sigma_v > 0.0
            && self.lsf_ridge > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FlamError::config("invalid solver configuration"))
        }
    }

    /// Factor weights from the per-sample white noise of the logged sensors
    /// (biases are not modeled). A channel with no white noise falls back to
    /// the nominal sensor so the information stays finite.
    pub fn factor_weights(&self, noise: &SensorNoise) -> FactorWeights {
        let nominal_ins = InsNoiseSpec::consumer_grade(noise.ins.rate_hz);
        let nominal_adcp = AdcpNoiseSpec::doppler_profiler(noise.adcp.rate_hz);
        let sd = |c: &ChannelNoise, nominal: &ChannelNoise, rate: f64| {
            let s = c.sample_sd(rate);
            if s > 0.0 {
                s
            } else {
                nominal.sample_sd(rate)
            }
        };
        FactorWeights {
            sigma_v: self.sigma_v,
            sigma_a: sd(&noise.ins.accel, &nominal_ins.accel, noise.ins.rate_hz),
            sigma_r: sd(&noise.ins.gyro, &nominal_ins.gyro, noise.ins.rate_hz),
            sigma_z: sd(&noise.adcp.rel_flow, &nominal_adcp.rel_flow, noise.adcp.rate_hz),
        }
    }
}

/// Linearized information system `(Omega, xi)` with `xi = sum J^T W e`; the
/// Gauss-Newton step is `-(Omega + lambda I)^-1 xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub omega: BlockSparse,
    pub xi: DVector<f64>,
    pub state_count: usize,
    pub node_count: usize,
}

/// A variable of the full state, for covariance queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableId {
    State(usize),
    Node(usize),
}

impl SparseSystem {
    pub fn zeros(state_count: usize, node_count: usize) -> Self {
        let mut sizes = vec![RobotState::DIM; state_count];
        sizes.extend(std::iter::repeat_n(2, node_count));
        let omega = BlockSparse::new(sizes);
        let xi = DVector::zeros(omega.dim());
        Self { omega, xi, state_count, node_count }
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn block_of(&self, id: VariableId) -> Result<usize> {
        match id {
            VariableId::State(k) if k < self.state_count => Ok(k),
            VariableId::Node(i) if i < self.node_count => Ok(self.state_count + i),
            VariableId::State(k) => Err(FlamError::DimensionMismatch { expected: self.state_count, actual: k + 1 }),
            VariableId::Node(i) => Err(FlamError::DimensionMismatch { expected: self.node_count, actual: i + 1 }),
        }
    }

    fn add_rhs(&mut self, block: usize, v: &[f64]) {
        let off = self.omega.block_offset(block);
        for (i, x) in v.iter().enumerate() {
            self.xi[off + i] += x;
        }
    }
}

/// Accumulates every motion and observation factor linearized at `y`.
pub fn assemble(problem: &FlamProblem, y: &FullState) -> Result<SparseSystem> {
    problem.check_state(y)?;
    let n_states = y.states.len();
    let mut sys = SparseSystem::zeros(n_states, y.map.node_velocities.len());

    let wm = SMatrix::<f64, 5, 5>::from_diagonal(&problem.weights.motion_information());
    for f in &problem.motion {
        let e = f.residual(&y.states, problem.dt);
        let j = f.jacobian(&y.states, problem.dt);
        let jtw = j.transpose() * wm;
        let h = jtw * j;
        let g = jtw * e;
        let (a, b) = (f.step - 1, f.step);
        sys.omega.add_block(a, a, &h.view((0, 0), (5, 5)).clone_owned());
        sys.omega.add_block(a, b, &h.view((0, 5), (5, 5)).clone_owned());
        sys.omega.add_block(b, b, &h.view((5, 5), (5, 5)).clone_owned());
        sys.add_rhs(a, g.fixed_rows::<5>(0).as_slice());
        sys.add_rhs(b, g.fixed_rows::<5>(5).as_slice());
    }

    let wz = problem.weights.observation_information();
    for f in &problem.observations {
        let (e, j, nodes) = f.evaluate(&y.states[f.step], &y.map);
        let h = j.transpose() * j * wz;
        let g = j.transpose() * e * wz;
        // Local variable slots: the state, then the four nodes.
        let slots = [
            (f.step, 0usize, 5usize),
            (n_states + nodes[0], 5, 2),
            (n_states + nodes[1], 7, 2),
            (n_states + nodes[2], 9, 2),
            (n_states + nodes[3], 11, 2),
        ];
        for (a, &(ba, oa, sa)) in slots.iter().enumerate() {
            sys.add_rhs(ba, &g.as_slice()[oa..oa + sa]);
            for &(bb, ob, sb) in &slots[a..] {
                let blk = h.view((oa, ob), (sa, sb)).clone_owned();
                if ba == bb && oa != ob {
                    // Same node twice only happens on degenerate grids; fold both halves.
                    sys.omega.add_block(ba, bb, &(&blk + blk.transpose()));
                } else {
                    sys.omega.add_block(ba, bb, &blk);
                }
            }
        }
    }
    Ok(sys)
}

/// Adds `weight * I` to the block of the initial state.
pub fn anchor_initial_state(mut sys: SparseSystem, weight: f64) -> SparseSystem {
    if sys.state_count > 0 {
        sys.omega.add_diagonal_block(0, weight);
    }
    sys
}

/// Solves `(Omega + damping I) delta = -xi`.
pub fn solve_damped_cg(sys: &SparseSystem, damping: f64, cfg: &CgConfig) -> CgOutcome {
    conjugate_gradient(&sys.omega, damping, &(-&sys.xi), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub blocks: Vec<DMatrix<f64>>,
    /// False if any column solve hit the CG iteration cap.
    pub converged: bool,
}

/// Diagonal blocks of `(Omega + damping I)^-1`, one CG solve per column.
pub fn marginal_covariance(
    sys: &SparseSystem,
    damping: f64,
    ids: &[VariableId],
    cfg: &CgConfig,
) -> Result<Covariance> {
    let mut blocks = Vec::with_capacity(ids.len());
    let mut converged = true;
    for &id in ids {
        let b = sys.block_of(id)?;
        let (off, size) = (sys.omega.block_offset(b), sys.omega.block_size(b));
        let mut cov = DMatrix::zeros(size, size);
        for c in 0..size {
            let mut rhs = DVector::zeros(sys.dim());
            rhs[off + c] = 1.0;
            let out = conjugate_gradient(&sys.omega, damping, &rhs, cfg);
            converged &= out.converged;
            cov.set_column(c, &out.solution.rows(off, size));
        }
        blocks.push((&cov + cov.transpose()) * 0.5);
    }
    Ok(Covariance { blocks, converged })
}

/// One outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// Cost after the iteration.
    pub cost: f64,
    /// Cost at the linearization point.
    pub cost_before: f64,
    /// `max |delta_i|`.
    pub step_norm: f64,
    pub cg_iters: usize,
    pub cg_converged: bool,
    pub damping: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct Optimization {
    pub estimate: FullState,
    pub initial: FullState,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub converged: bool,
    pub problem: FlamProblem,
}

/// Full FLAM: builds the problem from the log, initializes with dead
/// reckoning and the least-squares map fit, then iterates to convergence.
pub fn optimize(log: &SensorLog, grid: &GridSpec, config: &SolverConfig) -> Result<Optimization> {
    config.validate()?;
    let problem = FlamProblem::from_log(log, grid, config.factor_weights(&log.noise))?;
    let initial = initial_guess_with(log, grid, config.lsf_ridge)?;
    optimize_from(problem, initial, config)
}

pub fn optimize_from(problem: FlamProblem, initial: FullState, config: &SolverConfig) -> Result<Optimization> {
    config.validate()?;
    problem.check_state(&initial)?;
    let mut y = initial.clone();
    let mut cost = problem.cost(&y);
    let mut damping = config.damping;
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut increases = 0;

    for iteration in 1..=config.gn.max_iterations {
        let sys = anchor_initial_state(assemble(&problem, &y)?, config.anchor_weight);
        let out = solve_damped_cg(&sys, damping, &config.cg);
        let step_norm = out.solution.amax();
        let mut candidate = y.clone();
        candidate.apply_increment(&out.solution)?;
        let new_cost = problem.cost(&candidate);
        if !new_cost.is_finite() {
            return Err(FlamError::Diverged { iterations: iteration, cost: new_cost });
        }
        let accepted = !config.adaptive_damping || new_cost <= cost;
        diagnostics.push(IterationDiagnostics {
            iteration,
            cost: if accepted { new_cost } else { cost },
            cost_before: cost,
            step_norm,
            cg_iters: out.iterations,
            cg_converged: out.converged,
            damping,
            accepted,
        });
        if !accepted {
            damping = (damping * 10.0).max(1e-9);
            continue;
        }
        if config.adaptive_damping {
            damping /= 10.0;
        }
        increases = if new_cost > cost { increases + 1 } else { 0 };
        if increases >= 2 {
            return Err(FlamError::Diverged { iterations: iteration, cost: new_cost });
        }
        y = candidate;
        cost = new_cost;
        if step_norm < config.gn.step_tolerance {
            converged = true;
            break;
        }
    }
    Ok(Optimization { estimate: y, initial, diagnostics, converged, problem })
}

/// Anchored system at `y`, as used by the last outer iteration.
pub fn final_system(problem: &FlamProblem, y: &FullState, config: &SolverConfig) -> Result<SparseSystem> {
    Ok(anchor_initial_state(assemble(problem, y)?, config.anchor_weight))
}
