use nalgebra::{DMatrix, SMatrix};

use crate::error::{FlamError, Result};
use crate::factors::{associate, FullState};
use crate::flow_map::{FlowMap, GridSpec};
use crate::geometry::{rotation_to_body, Vec2};
use crate::sim::{dead_reckon, SensorLog, TimedState};

/// Dead-reckoned trajectory from the true initial state plus the least-squares
/// map fit along it.
pub fn initial_guess(log: &SensorLog, grid: &GridSpec) -> Result<FullState> {
    initial_guess_with(log, grid, 1e-8)
}

pub fn initial_guess_with(log: &SensorLog, grid: &GridSpec, ridge: f64) -> Result<FullState> {
    log.validate()?;
    let x0 = log.truth.first().ok_or(FlamError::EmptyLog)?.state;
    let dr = dead_reckon(log, &x0)?;
    let map = lsf_map(log, grid, &dr, ridge)?;
    Ok(FullState { states: dr.into_iter().map(|s| s.state).collect(), map })
}

/// Ridge-regularized fit of node velocities to `R(psi)^T z + v` along a
/// trajectory estimate. Bilinear weights come from the cell the sample was
/// associated with, evaluated at the estimated position.
pub fn lsf_map(log: &SensorLog, grid: &GridSpec, states: &[TimedState], ridge: f64) -> Result<FlowMap> {
    if states.len() != log.state_count() {
        return Err(FlamError::DimensionMismatch { expected: log.state_count(), actual: states.len() });
    }
    let (observations, _) = associate(log, grid)?;
    let n = grid.node_count();
    let mut ata = DMatrix::<f64>::identity(n, n) * ridge;
    let mut atb = DMatrix::<f64>::zeros(n, 2);
    for f in &observations {
        let x = &states[f.step].state;
        let cw = grid.cell_weights(f.cell, &x.position);
        let b: Vec2 = rotation_to_body(x.heading).transpose() * f.z + x.velocity;
        let w = SMatrix::<f64, 4, 1>::from_row_slice(&cw.weights);
        let outer = w * w.transpose();
        for (i, &ni) in cw.node_indices.iter().enumerate() {
            for (j, &nj) in cw.node_indices.iter().enumerate() {
                ata[(ni, nj)] += outer[(i, j)];
            }
            atb[(ni, 0)] += w[i] * b.x;
            atb[(ni, 1)] += w[i] * b.y;
        }
    }
    let sol = ata
        .cholesky()
        .ok_or_else(|| FlamError::config("map fit normal equations are not positive definite"))?
        .solve(&atb);
    FlowMap::new(*grid, (0..n).map(|i| Vec2::new(sol[(i, 0)], sol[(i, 1)])).collect())
}
