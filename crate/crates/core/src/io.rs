//! On-disk run artifacts: CSV tables (header row, 17 significant digits) and JSON.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{FlamError, Result};
use crate::flow_map::{FlowMap, GridSpec};
use crate::geometry::Vec2;
use crate::metrics::RunReport;
use crate::scenario::Scenario;
use crate::sim::{AdcpSample, InsSample, RobotState, SensorLog, TimedState};
use crate::solver::IterationDiagnostics;

pub const INS_FILE: &str = "ins.csv";
pub const ADCP_FILE: &str = "adcp.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const META_FILE: &str = "meta.json";
pub const FLAM_TRAJECTORY_FILE: &str = "flam_trajectory.csv";
pub const DR_TRAJECTORY_FILE: &str = "dr_trajectory.csv";
pub const FLAM_MAP_FILE: &str = "flam_map.csv";
pub const LSF_MAP_FILE: &str = "lsf_map.csv";
pub const ITERATIONS_FILE: &str = "iterations.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const ERRORS_FILE: &str = "errors.csv";
pub const MAP_ERRORS_FILE: &str = "map_err.csv";

const INS_HEADER: [&str; 4] = ["t", "ax", "ay", "yaw_rate"];
const ADCP_HEADER: [&str; 3] = ["t", "zx", "zy"];
const STATE_HEADER: [&str; 6] = ["t", "x", "y", "vx", "vy", "heading"];
const MAP_HEADER: [&str; 5] = ["node_id", "x", "y", "vx", "vy"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FlamError + '_ {
    move |source| FlamError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> FlamError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => FlamError::Io { path: path.to_path_buf(), source },
        kind => FlamError::Parse { path: path.to_path_buf(), line, msg: format!("{kind:?}") },
    }
}

/// Full double precision, 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Rows of numbers from a CSV with exactly the expected header. Errors carry
/// the 1-based file line.
fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let got = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(FlamError::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header {}, found {}", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |msg: String| FlamError::Parse { path: path.to_path_buf(), line, msg };
        if rec.len() != header.len() {
            return Err(parse_err(format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let row = rec
            .iter()
            .zip(header)
            .map(|(field, name)| match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(format!("column {name}: cannot parse {field:?} as a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FlamError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

pub fn write_trajectory(path: &Path, states: &[TimedState]) -> Result<()> {
    write_table(
        path,
        &STATE_HEADER,
        states.iter().map(|s| {
            let x = &s.state;
            [s.t, x.position.x, x.position.y, x.velocity.x, x.velocity.y, x.heading].map(fmt_f64).to_vec()
        }),
    )
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TimedState>> {
    Ok(read_table(path, &STATE_HEADER)?
        .into_iter()
        .map(|r| TimedState { t: r[0], state: RobotState::from_slice(&r[1..]) })
        .collect())
}

pub fn write_map(path: &Path, map: &FlowMap) -> Result<()> {
    write_table(
        path,
        &MAP_HEADER,
        map.node_velocities.iter().enumerate().map(|(i, v)| {
            let p = map.grid.node_position(i);
            let mut row = vec![i.to_string()];
            row.extend([p.x, p.y, v.x, v.y].map(fmt_f64));
            row
        }),
    )
}

/// Reads a map written by [`write_map`] on `grid`; node ids must be complete and in order.
pub fn read_map(path: &Path, grid: &GridSpec) -> Result<FlowMap> {
    let rows = read_table(path, &MAP_HEADER)?;
    if rows.len() != grid.node_count() {
        return Err(FlamError::DimensionMismatch { expected: grid.node_count(), actual: rows.len() });
    }
    for (i, r) in rows.iter().enumerate() {
        if r[0] != i as f64 {
            return Err(FlamError::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: format!("expected node_id {i}, found {}", r[0]),
            });
        }
    }
    FlowMap::new(*grid, rows.iter().map(|r| Vec2::new(r[3], r[4])).collect())
}

/// Writes `ins.csv`, `adcp.csv`, `truth.csv` and `meta.json` (the scenario).
pub fn write_sensor_log(dir: &Path, scenario: &Scenario, log: &SensorLog) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_table(
        &dir.join(INS_FILE),
        &INS_HEADER,
        log.ins.iter().map(|u| [u.t, u.accel.x, u.accel.y, u.yaw_rate].map(fmt_f64).to_vec()),
    )?;
    write_table(
        &dir.join(ADCP_FILE),
        &ADCP_HEADER,
        log.adcp.iter().map(|z| [z.t, z.rel_flow.x, z.rel_flow.y].map(fmt_f64).to_vec()),
    )?;
    write_trajectory(&dir.join(TRUTH_FILE), &log.truth)?;
    write_json(&dir.join(META_FILE), scenario)
}

pub fn read_scenario(dir: &Path) -> Result<Scenario> {
    let scenario: Scenario = read_json(&dir.join(META_FILE))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn read_sensor_log(dir: &Path) -> Result<(Scenario, SensorLog)> {
    let scenario = read_scenario(dir)?;
    let ins = read_table(&dir.join(INS_FILE), &INS_HEADER)?
        .into_iter()
        .map(|r| InsSample { t: r[0], accel: Vec2::new(r[1], r[2]), yaw_rate: r[3] })
        .collect();
    let adcp = read_table(&dir.join(ADCP_FILE), &ADCP_HEADER)?
        .into_iter()
        .map(|r| AdcpSample { t: r[0], rel_flow: Vec2::new(r[1], r[2]) })
        .collect();
    let truth = read_trajectory(&dir.join(TRUTH_FILE))?;
    let log = SensorLog { ins, adcp, truth, noise: scenario.noise };
    Ok((scenario, log))
}

pub fn write_iterations(path: &Path, diagnostics: &[IterationDiagnostics]) -> Result<()> {
    let mut text = String::new();
    for d in diagnostics {
        text.push_str(&serde_json::to_string(d)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_iterations(path: &Path) -> Result<Vec<IterationDiagnostics>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FlamError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Solver outputs of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutputs {
    pub flam_trajectory: Vec<TimedState>,
    pub dr_trajectory: Vec<TimedState>,
    pub flam_map: FlowMap,
    pub lsf_map: FlowMap,
    pub iterations: Vec<IterationDiagnostics>,
}

pub fn write_solve_outputs(dir: &Path, out: &SolveOutputs) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_trajectory(&dir.join(FLAM_TRAJECTORY_FILE), &out.flam_trajectory)?;
    write_trajectory(&dir.join(DR_TRAJECTORY_FILE), &out.dr_trajectory)?;
    write_map(&dir.join(FLAM_MAP_FILE), &out.flam_map)?;
    write_map(&dir.join(LSF_MAP_FILE), &out.lsf_map)?;
    write_iterations(&dir.join(ITERATIONS_FILE), &out.iterations)
}

pub fn read_solve_outputs(dir: &Path, grid: &GridSpec) -> Result<SolveOutputs> {
    Ok(SolveOutputs {
        flam_trajectory: read_trajectory(&dir.join(FLAM_TRAJECTORY_FILE))?,
        dr_trajectory: read_trajectory(&dir.join(DR_TRAJECTORY_FILE))?,
        flam_map: read_map(&dir.join(FLAM_MAP_FILE), grid)?,
        lsf_map: read_map(&dir.join(LSF_MAP_FILE), grid)?,
        iterations: read_iterations(&dir.join(ITERATIONS_FILE))?,
    })
}

/// Writes `report.json`, `errors.csv` and `map_err.csv`.
pub fn write_report(dir: &Path, grid: &GridSpec, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join(REPORT_FILE), report)?;
    let n = report.flam.t.len();
    write_table(
        &dir.join(ERRORS_FILE),
        &["t", "dr_pos_err", "flam_pos_err", "flam_vel_err", "dr_vel_err"],
        (0..n).map(|k| {
            [report.flam.t[k], report.dr.position[k], report.flam.position[k], report.flam.velocity[k], report.dr.velocity[k]]
                .map(fmt_f64)
                .to_vec()
        }),
    )?;
    write_table(
        &dir.join(MAP_ERRORS_FILE),
        &["node_id", "x", "y", "boundary", "lsf_err", "flam_err"],
        (0..grid.node_count()).map(|i| {
            let p = grid.node_position(i);
            vec![
                i.to_string(),
                fmt_f64(p.x),
                fmt_f64(p.y),
                u8::from(report.flam_map.boundary[i]).to_string(),
                fmt_f64(report.lsf_map.node[i]),
                fmt_f64(report.flam_map.node[i]),
            ]
        }),
    )
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    read_json(&dir.join(REPORT_FILE))
}
