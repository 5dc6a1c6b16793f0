//! Test oracles independent of the sparse solver: central finite differences
//! and a dense stacked-Jacobian Gauss-Newton step solved by LU.
#![allow(dead_code)]

use flam::factors::{FactorWeights, FlamProblem, FullState, MotionFactor, ObservationFactor};
use flam::flow_map::{FlowMap, GridSpec};
use flam::sim::{InsSample, RobotState};
use flam::Vec2;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central differences of `f` at `x`, step `h * max(1, |x_j|)`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[j] += step;
        xm[j] -= step;
        jac.set_column(j, &((f(&xp) - f(&xm)) / (2.0 * step)));
    }
    jac
}

/// Largest relative entry error; entries within `floor` absolute count as exact.
pub fn max_rel_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| {
            let d = (a - n).abs();
            if d <= floor {
                0.0
            } else {
                d / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub fn state_from(v: &[f64]) -> RobotState {
    RobotState::from_slice(v)
}

/// `(e, J, w)` stacked over all factors, with `w` the diagonal weights.
pub fn stacked(problem: &FlamProblem, y: &FullState) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let n = y.dim();
    let rows = 5 * problem.motion.len() + 2 * problem.observations.len();
    let mut e = DVector::zeros(rows);
    let mut jac = DMatrix::zeros(rows, n);
    let mut w = DVector::zeros(rows);
    let wm = problem.weights.motion_information();
    let wz = problem.weights.observation_information();
    let mut r = 0;
    for f in &problem.motion {
        let res = f.residual(&y.states, problem.dt);
        let fj = f.jacobian(&y.states, problem.dt);
        let (a, b) = (y.state_offset(f.step - 1), y.state_offset(f.step));
        for i in 0..5 {
            e[r + i] = res[i];
            w[r + i] = wm[i];
            for c in 0..5 {
                jac[(r + i, a + c)] += fj[(i, c)];
                jac[(r + i, b + c)] += fj[(i, 5 + c)];
            }
        }
        r += 5;
    }
    for f in &problem.observations {
        let (res, h, nodes) = f.evaluate(&y.states[f.step], &y.map);
        let s = y.state_offset(f.step);
        for i in 0..2 {
            e[r + i] = res[i];
            w[r + i] = wz;
            for c in 0..5 {
                jac[(r + i, s + c)] += h[(i, c)];
            }
            for (q, &node) in nodes.iter().enumerate() {
                let o = y.node_offset(node);
                for c in 0..2 {
                    jac[(r + i, o + c)] += h[(i, 5 + 2 * q + c)];
                }
            }
        }
        r += 2;
    }
    (e, jac, w)
}

pub fn dense_cost(problem: &FlamProblem, y: &FullState) -> f64 {
    let (e, _, w) = stacked(problem, y);
    e.component_mul(&e).dot(&w)
}

/// `delta = -(J^T W J + anchor on x_0 + damping I)^-1 J^T W e`.
pub fn dense_gn_step(problem: &FlamProblem, y: &FullState, damping: f64, anchor: f64) -> DVector<f64> {
    let (e, jac, w) = stacked(problem, y);
    let jtw = jac.transpose() * DMatrix::from_diagonal(&w);
    let mut omega = &jtw * &jac;
    for i in 0..5 {
        omega[(i, i)] += anchor;
    }
    for i in 0..omega.nrows() {
        omega[(i, i)] += damping;
    }
    let xi = jtw * e;
    -omega.lu().solve(&xi).expect("nonsingular normal equations")
}

pub fn weights() -> FactorWeights {
    FactorWeights { sigma_v: 0.1, sigma_a: 0.05, sigma_r: 0.02, sigma_z: 0.05 }
}

pub fn random_state<R: Rng>(rng: &mut R, grid: &GridSpec) -> RobotState {
    let hull = grid.hull();
    let p = Vec2::new(
        rng.random_range(hull.min[0]..hull.max[0]),
        rng.random_range(hull.min[1]..hull.max[1]),
    );
    RobotState::new(
        p,
        Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        rng.random_range(-3.0..3.0),
    )
}

pub fn random_map<R: Rng>(rng: &mut R, grid: GridSpec) -> FlowMap {
    let v = (0..grid.node_count())
        .map(|_| Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect();
    FlowMap::new(grid, v).unwrap()
}

/// A random problem on a unit-spaced grid: a smooth trajectory inside the hull,
/// INS inputs and observations consistent with a random map up to noise.
/// Returns the problem and a perturbed starting point.
pub fn random_problem(seed: u64, poses: usize, dims: [usize; 2], observations: usize) -> (FlamProblem, FullState) {
    let mut rng = rng(seed);
    let grid = GridSpec::new([0.0, 0.0], [1.0, 1.0], dims).unwrap();
    let dt = 0.1;
    let truth_map = random_map(&mut rng, grid);
    let hull = grid.hull();
    let mut p = Vec2::new(
        rng.random_range(hull.min[0] + 0.3..hull.max[0] - 0.3),
        rng.random_range(hull.min[1] + 0.3..hull.max[1] - 0.3),
    );
    let mut heading: f64 = rng.random_range(-3.0..3.0);
    let mut states = Vec::with_capacity(poses);
    let mut vel = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for k in 0..poses {
        if k > 0 {
            vel += Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let next = p + vel * dt;
            // reflect to stay inside the hull
            if !hull.contains(&next, -0.05) {
                vel = -vel;
            }
            p += vel * dt;
            heading += rng.random_range(-0.2..0.2);
        }
        states.push(RobotState::new(p, vel, heading));
    }
    let motion = (1..poses)
        .map(|k| {
            let e = flam::factors::motion_residual(
                &states[k - 1],
                &states[k],
                &InsSample { t: k as f64 * dt, accel: Vec2::zeros(), yaw_rate: 0.0 },
                dt,
            );
            // zero-input residual is -prediction; invert it to get a consistent input
            let accel = Vec2::new(-e[2], -e[3]) + Vec2::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
            let yaw_rate = -e[4] + rng.random_range(-0.01..0.01);
            MotionFactor { step: k, input: InsSample { t: k as f64 * dt, accel, yaw_rate } }
        })
        .collect();
    let obs = (0..observations)
        .map(|i| {
            let step = (i * poses / observations.max(1) + 1).min(poses - 1);
            let cell = grid.cell_of(&states[step].position).unwrap();
            let f = ObservationFactor { step, z: Vec2::zeros(), cell };
            let pred = -f.residual(&states[step], &truth_map);
            let z = pred + Vec2::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
            ObservationFactor { step, z, cell }
        })
        .collect();
    let problem = FlamProblem {
        dt,
        grid,
        motion,
        observations: obs,
        weights: weights(),
        dropped_observations: 0,
    };
    let mut start = FullState { states: states.clone(), map: truth_map };
    for s in start.states.iter_mut().skip(1) {
        s.position += Vec2::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
        s.heading += rng.random_range(-0.05..0.05);
    }
    for v in &mut start.map.node_velocities {
        *v += Vec2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    }
    (problem, start)
}

/// Worst violations of the interpolation properties over `points` random
/// samples on a random grid: `[partition of unity, node exactness, affine
/// reproduction, cross-edge continuity]`.
pub fn interpolation_violations(seed: u64, points: usize) -> [f64; 4] {
    use flam::flow_map::locate_cell;
    let mut rng = rng(seed);
    let grid = GridSpec::new(
        [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
        [rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)],
        [rng.random_range(2..8), rng.random_range(2..8)],
    )
    .unwrap();
    let hull = grid.hull();
    let a = nalgebra::Matrix2::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let b = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let affine = FlowMap::new(grid, (0..grid.node_count()).map(|i| a * grid.node_position(i) + b).collect()).unwrap();
    let random = random_map(&mut rng, grid);
    let mut worst = [0.0f64; 4];
    for i in 0..grid.node_count() {
        let v = random.interpolate(&grid.node_position(i)).unwrap();
        worst[1] = worst[1].max((v - random.node_velocities[i]).norm());
    }
    for _ in 0..points {
        let p = Vec2::new(rng.random_range(hull.min[0]..=hull.max[0]), rng.random_range(hull.min[1]..=hull.max[1]));
        let cw = locate_cell(&grid, &p).unwrap();
        let sum: f64 = cw.weights.iter().sum();
        let out_of_range = cw.weights.iter().map(|w| (-w).max(w - 1.0).max(0.0)).fold(0.0, f64::max);
        worst[0] = worst[0].max((sum - 1.0).abs()).max(out_of_range);
        worst[2] = worst[2].max((affine.interpolate(&p).unwrap() - (a * p + b)).norm());

        // a point on a shared interior edge, evaluated from both adjacent cells
        let vertical = rng.random_bool(0.5);
        let (axis, n) = if vertical { (0, grid.nx()) } else { (1, grid.ny()) };
        if n > 2 {
            let line = rng.random_range(1..n - 1);
            let mut q = p;
            q[axis] = grid.origin[axis] + line as f64 * grid.spacing[axis];
            let (c, r) = grid.cell_of(&q).unwrap();
            let (mut lo, mut hi) = ((c, r), (c, r));
            if vertical {
                lo.0 = line - 1;
                hi.0 = line;
            } else {
                lo.1 = line - 1;
                hi.1 = line;
            }
            let va = random.blend(&grid.cell_weights(lo, &q));
            let vb = random.blend(&grid.cell_weights(hi, &q));
            worst[3] = worst[3].max((va - vb).norm());
        }
    }
    worst
}

/// Noiseless case1 geometry in a uniform (exactly representable) flow,
/// initialized at the truth. Returns `(initial cost, first step 2-norm)`.
pub fn noiseless_fixed_point() -> (f64, f64) {
    use flam::flow_models::FlowFieldSpec;
    use flam::scenario::Scenario;
    use flam::sim::SensorNoise;
    use flam::solver::{anchor_initial_state, assemble, solve_damped_cg};

    let mut sc = Scenario::preset("case1").unwrap();
    sc.flow = FlowFieldSpec::uniform(Vec2::new(0.2, -0.1), sc.flow.domain);
    sc.noise = SensorNoise::noiseless();
    let log = flam::pipeline::simulate(&sc).unwrap();
    let problem = FlamProblem::from_log(&log, &sc.grid, sc.solver.factor_weights(&log.noise)).unwrap();
    let y = FullState {
        states: log.truth.iter().map(|s| s.state).collect(),
        map: flam::pipeline::truth_map(&sc).unwrap(),
    };
    let sys = anchor_initial_state(assemble(&problem, &y).unwrap(), sc.solver.anchor_weight);
    let step = solve_damped_cg(&sys, sc.solver.damping, &sc.solver.cg).solution;
    (problem.cost(&y), step.norm())
}
