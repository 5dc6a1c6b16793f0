//! End-to-end runs: simulate, solve, evaluate, in memory or through run directories.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{FlamError, Result};
use crate::factors::{FlamProblem, FullState};
use crate::flow_map::{sample_truth, FlowMap};
use crate::flow_models::spectrum::{estimate_spectrum, SlopeFit, Spectrum, SpectrumConfig};
use crate::flow_models::{FlowField, KsField};
use crate::io::{self, SolveOutputs};
use crate::metrics::{self, RunReport};
use crate::scenario::Scenario;
use crate::sim::{simulate_sensors, SensorLog, TimedState};
use crate::solver::optimize;

/// Sample grid side used by the `spectrum` command.
pub const SPECTRUM_GRID: usize = 512;

pub fn simulate(scenario: &Scenario) -> Result<SensorLog> {
    scenario.validate()?;
    let truth = scenario.truth_trajectory()?;
    let field = FlowField::new(&scenario.seeded_flow())?;
    simulate_sensors(&truth, &field, &scenario.noise, scenario.seed)
}

/// Steady part of the flow sampled at the grid nodes; turbulence is not mappable.
pub fn truth_map(scenario: &Scenario) -> Result<FlowMap> {
    sample_truth(&scenario.steady_flow(), &scenario.grid, 0.0)
}

fn timed(log: &SensorLog, states: &FullState) -> Vec<TimedState> {
    let t0 = log.start_time();
    states
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| TimedState { t: if k == 0 { t0 } else { log.ins[k - 1].t }, state: *s })
        .collect()
}

pub fn solve(scenario: &Scenario, log: &SensorLog) -> Result<SolveOutputs> {
    let opt = optimize(log, &scenario.grid, &scenario.solver)?;
    Ok(SolveOutputs {
        flam_trajectory: timed(log, &opt.estimate),
        dr_trajectory: timed(log, &opt.initial),
        flam_map: opt.estimate.map,
        lsf_map: opt.initial.map,
        iterations: opt.diagnostics,
    })
}

pub fn evaluate(scenario: &Scenario, log: &SensorLog, out: &SolveOutputs) -> Result<RunReport> {
    let truth_map = truth_map(scenario)?;
    let flam_map = metrics::map_errors(&out.flam_map, &truth_map)?;
    let problem = FlamProblem::from_log(log, &scenario.grid, scenario.solver.factor_weights(&log.noise))?;
    let estimate = FullState {
        states: out.flam_trajectory.iter().map(|s| s.state).collect(),
        map: out.flam_map.clone(),
    };
    problem.check_state(&estimate)?;
    let converged = out
        .iterations
        .last()
        .is_some_and(|d| d.accepted && d.step_norm < scenario.solver.gn.step_tolerance);
    Ok(RunReport {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        dr: metrics::trajectory_errors(&out.dr_trajectory, &log.truth)?,
        flam: metrics::trajectory_errors(&out.flam_trajectory, &log.truth)?,
        lsf_map: metrics::map_errors(&out.lsf_map, &truth_map)?,
        flam_map,
        interior_v_sign_agreement: metrics::interior_v_sign_agreement(&out.flam_map, &truth_map, 0.0)?,
        residuals: metrics::residual_summary(&problem, &estimate),
        converged,
        iterations: out.iterations.clone(),
    })
}

/// Simulate, solve and evaluate one seeded scenario.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    let log = simulate(scenario)?;
    let out = solve(scenario, &log)?;
    evaluate(scenario, &log, &out)
}

/// Independent runs of `scenario` at each seed, in parallel. Results keep seed order.
pub fn monte_carlo(scenario: &Scenario, seeds: &[u64]) -> Vec<Result<RunReport>> {
    seeds.par_iter().map(|&s| run(&scenario.clone().with_seed(s))).collect()
}

/// Like [`monte_carlo`], writing each run to `root/seed_<seed>`.
pub fn monte_carlo_to_dirs(scenario: &Scenario, seeds: &[u64], root: &Path) -> Vec<Result<RunReport>> {
    seeds
        .par_iter()
        .map(|&s| run_to_dir(&scenario.clone().with_seed(s), &root.join(format!("seed_{s}"))))
        .collect()
}

pub fn simulate_to_dir(scenario: &Scenario, out: &Path) -> Result<SensorLog> {
    let log = simulate(scenario)?;
    io::write_sensor_log(out, scenario, &log)?;
    Ok(log)
}

/// Reads a simulation directory and writes solver outputs to `out`. When `out`
/// differs from `input` the simulation files are copied along, so `out` is a
/// complete run directory.
pub fn solve_dir(input: &Path, out: &Path) -> Result<SolveOutputs> {
    let (scenario, log) = io::read_sensor_log(input)?;
    let outputs = solve(&scenario, &log)?;
    io::write_solve_outputs(out, &outputs)?;
    if !same_dir(input, out) {
        for f in [io::INS_FILE, io::ADCP_FILE, io::TRUTH_FILE, io::META_FILE] {
            let (from, to) = (input.join(f), out.join(f));
            fs::copy(&from, &to).map_err(|source| FlamError::Io { path: from.clone(), source })?;
        }
    }
    Ok(outputs)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Evaluates a solved run directory and writes the report files into it.
pub fn eval_dir(dir: &Path) -> Result<RunReport> {
    let (scenario, log) = io::read_sensor_log(dir)?;
    let outputs = io::read_solve_outputs(dir, &scenario.grid)?;
    let report = evaluate(&scenario, &log, &outputs)?;
    io::write_report(dir, &scenario.grid, &report)?;
    Ok(report)
}

/// Runs simulate, solve and eval into `out`.
pub fn run_to_dir(scenario: &Scenario, out: &Path) -> Result<RunReport> {
    simulate_to_dir(scenario, out)?;
    solve_dir(out, out)?;
    eval_dir(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub spectrum: Spectrum,
    pub fit: Option<SlopeFit>,
}

/// Radially binned spectrum of the scenario's turbulence with the fitted inertial-range slope.
pub fn spectrum(scenario: &Scenario, grid: usize) -> Result<SpectrumReport> {
    let params = scenario
        .turbulence()
        .ok_or_else(|| FlamError::Config("scenario has no turbulence to analyze".into()))?;
    let field = KsField::new(&params)?;
    let spectrum = estimate_spectrum(&field, &params, &SpectrumConfig { grid: Some(grid), ..Default::default() })?;
    let fit = if spectrum.is_empty() { None } else { spectrum.fit_inertial_range(&params) };
    Ok(SpectrumReport { spectrum, fit })
}

pub fn write_spectrum(path: &Path, report: &SpectrumReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FlamError::Io { path: path.to_path_buf(), source: e.into() })?;
    let io_err = |e: csv::Error| FlamError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(["k_lo", "k_hi", "k", "energy"]).map_err(io_err)?;
    for b in &report.spectrum.bins {
        w.write_record([b.k_lo, b.k_hi, b.k, b.energy].map(io::fmt_f64)).map_err(io_err)?;
    }
    w.flush().map_err(|source| FlamError::Io { path: path.to_path_buf(), source })
}
