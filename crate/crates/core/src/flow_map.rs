//! Gridded flow representation with bilinear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::flow_models::{FlowField, FlowFieldSpec};
use crate::geometry::{Rect, Vec2};

/// Tolerance for treating a point as lying on the closed grid hull.
const HULL_SLACK: f64 = 1e-9;

/// Regular grid of `nx * ny` nodes. Node `i` sits at column `i % nx`,
/// row `i / nx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub dims: [usize; 2],
}

impl GridSpec {
    pub fn new(origin: [f64; 2], spacing: [f64; 2], dims: [usize; 2]) -> Result<Self> {
        let grid = Self { origin, spacing, dims };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with `nx` columns and `ny` rows spanning `rect` exactly.
    pub fn covering(rect: &Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(FlamError::config("grid needs at least two nodes per axis"));
        }
        Self::new(
            rect.min,
            [rect.width() / (nx - 1) as f64, rect.height() / (ny - 1) as f64],
            [nx, ny],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing[0] > 0.0 && self.spacing[1] > 0.0) {
            return Err(FlamError::config("grid spacing must be positive"));
        }
        if self.dims[0] < 2 || self.dims[1] < 2 {
            return Err(FlamError::config("grid needs at least two nodes per axis"));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.dims[0]
    }

    pub fn ny(&self) -> usize {
        self.dims[1]
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn node_id(&self, col: usize, row: usize) -> usize {
        row * self.dims[0] + col
    }

    pub fn col_row(&self, id: usize) -> (usize, usize) {
        (id % self.dims[0], id / self.dims[0])
    }

    pub fn node_position(&self, id: usize) -> Vec2 {
        let (c, r) = self.col_row(id);
        Vec2::new(
            self.origin[0] + c as f64 * self.spacing[0],
            self.origin[1] + r as f64 * self.spacing[1],
        )
    }

    pub fn hull(&self) -> Rect {
        Rect::new(
            self.origin,
            [
                self.origin[0] + (self.dims[0] - 1) as f64 * self.spacing[0],
                self.origin[1] + (self.dims[1] - 1) as f64 * self.spacing[1],
            ],
        )
    }

    /// True for nodes on the outer ring of the grid.
    pub fn is_boundary(&self, id: usize) -> bool {
        let (c, r) = self.col_row(id);
        c == 0 || r == 0 || c + 1 == self.dims[0] || r + 1 == self.dims[1]
    }

    /// Cell `(col, row)` of the lower-left node boxing `p`.
    pub fn cell_of(&self, p: &Vec2) -> Result<(usize, usize)> {
        if !self.hull().contains(p, HULL_SLACK) {
            return Err(FlamError::OutOfMap { x: p.x, y: p.y });
        }
        let idx = |v: f64, o: f64, d: f64, n: usize| (((v - o) / d).floor().max(0.0) as usize).min(n - 2);
        Ok((
            idx(p.x, self.origin[0], self.spacing[0], self.dims[0]),
            idx(p.y, self.origin[1], self.spacing[1], self.dims[1]),
        ))
    }

    /// Local coordinates of `p` in the given cell; outside `[0, 1]` when `p`
    /// lies outside the cell.
    pub fn local_coords(&self, cell: (usize, usize), p: &Vec2) -> [f64; 2] {
        let x1 = self.origin[0] + cell.0 as f64 * self.spacing[0];
        let y1 = self.origin[1] + cell.1 as f64 * self.spacing[1];
        [(p.x - x1) / self.spacing[0], (p.y - y1) / self.spacing[1]]
    }

    /// Bilinear weights of `p` relative to the given cell. Points outside the
    /// cell get the cell's bilinear polynomial extended beyond its edges, so
    /// the weights stay smooth in `p` (and may leave `[0, 1]`).
    pub fn cell_weights(&self, cell: (usize, usize), p: &Vec2) -> CellWeights {
        let [tx, ty] = self.local_coords(cell, p);
        self.weights_at(cell, tx, ty)
    }

    fn weights_at(&self, cell: (usize, usize), tx: f64, ty: f64) -> CellWeights {
        let (col, row) = cell;
        CellWeights {
            cell,
            node_indices: [
                self.node_id(col, row),
                self.node_id(col + 1, row),
                self.node_id(col, row + 1),
                self.node_id(col + 1, row + 1),
            ],
            weights: [(1.0 - ty) * (1.0 - tx), (1.0 - ty) * tx, ty * (1.0 - tx), ty * tx],
            local: [tx, ty],
        }
    }
}

/// The four nodes boxing a point, ordered `(x1,y1), (x2,y1), (x1,y2), (x2,y2)`,
/// with their bilinear weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellWeights {
    pub cell: (usize, usize),
    pub node_indices: [usize; 4],
    pub weights: [f64; 4],
    /// Local cell coordinates, in `[0, 1]^2` for points inside the cell.
    pub local: [f64; 2],
}

impl CellWeights {
    /// Derivatives of the four weights with respect to physical `x` and `y`.
    pub fn gradients(&self, grid: &GridSpec) -> [[f64; 2]; 4] {
        let [tx, ty] = self.local;
        let (ix, iy) = (1.0 / grid.spacing[0], 1.0 / grid.spacing[1]);
        [
            [-(1.0 - ty) * ix, -(1.0 - tx) * iy],
            [(1.0 - ty) * ix, -tx * iy],
            [-ty * ix, (1.0 - tx) * iy],
            [ty * ix, tx * iy],
        ]
    }
}

pub fn locate_cell(grid: &GridSpec, p: &Vec2) -> Result<CellWeights> {
    let cell = grid.cell_of(p)?;
    let [tx, ty] = grid.local_coords(cell, p);
    Ok(grid.weights_at(cell, tx.clamp(0.0, 1.0), ty.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub grid: GridSpec,
    pub node_velocities: Vec<Vec2>,
}

impl FlowMap {
    pub fn new(grid: GridSpec, node_velocities: Vec<Vec2>) -> Result<Self> {
        grid.validate()?;
        if node_velocities.len() != grid.node_count() {
            return Err(FlamError::DimensionMismatch {
                expected: grid.node_count(),
                actual: node_velocities.len(),
            });
        }
        if node_velocities.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(FlamError::config("node velocities must be finite"));
        }
        Ok(Self { grid, node_velocities })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { node_velocities: vec![Vec2::zeros(); grid.node_count()], grid }
    }

    pub fn blend(&self, cw: &CellWeights) -> Vec2 {
        cw.node_indices
            .iter()
            .zip(&cw.weights)
            .fold(Vec2::zeros(), |acc, (&i, &w)| acc + self.node_velocities[i] * w)
    }

    pub fn interpolate(&self, p: &Vec2) -> Result<Vec2> {
        Ok(self.blend(&locate_cell(&self.grid, p)?))
    }
}

pub fn interpolate(map: &FlowMap, p: &Vec2) -> Result<Vec2> {
    map.interpolate(p)
}

/// Ground-truth map: the analytic field evaluated at every node at time `t`.
pub fn sample_truth(spec: &FlowFieldSpec, grid: &GridSpec, t: f64) -> Result<FlowMap> {
    let field = FlowField::new(spec)?;
    sample_field(&field, grid, t)
}

pub fn sample_field(field: &FlowField, grid: &GridSpec, t: f64) -> Result<FlowMap> {
    let v = (0..grid.node_count())
        .map(|i| {
            let p = grid.node_position(i);
            field.velocity(&p, t).map_err(|_| {
                FlamError::config(format!("grid node {i} at ({:.3}, {:.3}) lies outside the flow domain", p.x, p.y))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FlowMap::new(*grid, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_models::GyreParams;

    fn grid5() -> GridSpec {
        GridSpec::covering(&Rect::from_size(10.0, 10.0), 5, 5).unwrap()
    }

    #[test]
    fn node_weight_is_one_at_nodes() {
        let g = grid5();
        for id in 0..g.node_count() {
            let cw = locate_cell(&g, &g.node_position(id)).unwrap();
            for (i, &n) in cw.node_indices.iter().enumerate() {
                let expected = if n == id { 1.0 } else { 0.0 };
                assert_eq!(cw.weights[i], expected, "node {id}");
            }
        }
    }

    #[test]
    fn cell_center_and_edge_midpoint() {
        let g = grid5();
        let cw = locate_cell(&g, &Vec2::new(3.75, 6.25)).unwrap();
        assert_eq!(cw.cell, (1, 2));
        assert_eq!(cw.weights, [0.25; 4]);
        let cw = locate_cell(&g, &Vec2::new(3.75, 5.0)).unwrap();
        assert_eq!(cw.weights, [0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn hull_is_closed_and_outside_rejected() {
        let g = grid5();
        let cw = locate_cell(&g, &Vec2::new(10.0, 10.0)).unwrap();
        assert_eq!(cw.cell, (3, 3));
        assert_eq!(cw.weights[3], 1.0);
        assert!(matches!(locate_cell(&g, &Vec2::new(10.1, 5.0)), Err(FlamError::OutOfMap { .. })));
        assert!(locate_cell(&g, &Vec2::new(5.0, -0.5)).is_err());
    }

    #[test]
    fn weights_match_the_four_term_bilinear_formula() {
        let g = grid5();
        let p = Vec2::new(6.1, 3.3);
        let cw = locate_cell(&g, &p).unwrap();
        let (x1, x2, y1, y2) = (5.0, 7.5, 2.5, 5.0);
        let area = (x2 - x1) * (y2 - y1);
        let expected = [
            (y2 - p.y) * (x2 - p.x) / area,
            (y2 - p.y) * (p.x - x1) / area,
            (p.y - y1) * (x2 - p.x) / area,
            (p.y - y1) * (p.x - x1) / area,
        ];
        for (w, e) in cw.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
        assert_eq!(cw.node_indices, [g.node_id(2, 1), g.node_id(3, 1), g.node_id(2, 2), g.node_id(3, 2)]);
    }

    #[test]
    fn weight_gradients_match_finite_differences() {
        let g = grid5();
        let p = Vec2::new(6.1, 3.3);
        let cw = locate_cell(&g, &p).unwrap();
        let grads = cw.gradients(&g);
        let h = 1e-6;
        for axis in 0..2 {
            let mut d = Vec2::zeros();
            d[axis] = h;
            let plus = g.cell_weights(cw.cell, &(p + d));
            let minus = g.cell_weights(cw.cell, &(p - d));
            for i in 0..4 {
                let fd = (plus.weights[i] - minus.weights[i]) / (2.0 * h);
                assert!((fd - grads[i][axis]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn constant_map_reproduced() {
        let g = grid5();
        let c = Vec2::new(0.2, -0.7);
        let map = FlowMap::new(g, vec![c; 25]).unwrap();
        let v = map.interpolate(&Vec2::new(1.3, 8.8)).unwrap();
        assert!((v - c).norm() < 1e-15);
    }

    #[test]
    fn case_one_center_interpolation_within_curvature_bound() {
        let g = grid5();
        let gyre = GyreParams::default();
        let truth = sample_truth(&crate::flow_models::FlowFieldSpec::single_gyre(gyre), &g, 0.0).unwrap();
        let v = truth.interpolate(&Vec2::new(5.0, 5.0)).unwrap();
        // |d2v| <= A pi^3 / L^2 per component
        let hess = gyre.amplitude * std::f64::consts::PI.powi(3) / 100.0;
        let bound = hess * (2.5f64.powi(2) + 2.5f64.powi(2)) / 8.0;
        assert!(v.norm() <= bound + 1e-15, "{v:?} vs {bound}");
    }

    #[test]
    fn case_grids_have_expected_nodes() {
        let g = grid5();
        let xs: Vec<f64> = (0..5).map(|c| g.node_position(g.node_id(c, 0)).x).collect();
        assert_eq!(xs, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        let g2 = GridSpec::covering(&Rect::from_size(20.0, 10.0), 9, 5).unwrap();
        assert_eq!(g2.spacing, [2.5, 2.5]);
        assert_eq!(g2.node_count(), 45);
        assert_eq!(g2.node_position(44), Vec2::new(20.0, 10.0));
    }

    #[test]
    fn boundary_ring() {
        let g = grid5();
        let interior: Vec<usize> = (0..25).filter(|&i| !g.is_boundary(i)).collect();
        assert_eq!(interior, vec![6, 7, 8, 11, 12, 13, 16, 17, 18]);
    }

    #[test]
    fn zero_field_gives_zero_map() {
        let spec = crate::flow_models::FlowFieldSpec::uniform(Vec2::zeros(), Rect::from_size(10.0, 10.0));
        let map = sample_truth(&spec, &grid5(), 0.0).unwrap();
        assert!(map.node_velocities.iter().all(|v| *v == Vec2::zeros()));
    }

    #[test]
    fn nodes_outside_domain_are_a_config_error() {
        let spec = crate::flow_models::FlowFieldSpec::single_gyre(GyreParams::default());
        let big = GridSpec::covering(&Rect::from_size(20.0, 10.0), 9, 5).unwrap();
        assert!(matches!(sample_truth(&spec, &big, 0.0), Err(FlamError::Config(_))));
    }

    #[test]
    fn map_length_checked() {
        assert!(matches!(
            FlowMap::new(grid5(), vec![Vec2::zeros(); 3]),
            Err(FlamError::DimensionMismatch { expected: 25, actual: 3 })
        ));
    }
}
