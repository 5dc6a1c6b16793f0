mod common;

use common::*;
use flam::factors::{
    motion_jacobian, motion_residual, observation_jacobian, observation_residual, ObservationFactor,
};
use flam::flow_map::{FlowMap, GridSpec};
use flam::sim::{AdcpSample, InsSample, RobotState};
use flam::Vec2;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn grid() -> GridSpec {
    GridSpec::new([0.0, 0.0], [2.5, 2.5], [5, 5]).unwrap()
}

#[test]
fn motion_jacobian_matches_finite_differences() {
    let mut rng = rng(11);
    let g = grid();
    for _ in 0..100 {
        let prev = random_state(&mut rng, &g);
        let mut cur = random_state(&mut rng, &g);
        // keep the heading step away from the wrap discontinuity
        cur.heading = prev.heading + rng.random_range(-1.0..1.0);
        let u = InsSample { t: 0.1, accel: Vec2::new(0.3, -0.2), yaw_rate: 0.4 };
        let dt = 0.1;
        let x: DVector<f64> = DVector::from_iterator(10, prev.to_vector().iter().chain(cur.to_vector().iter()).copied());
        let f = |v: &DVector<f64>| {
            let e = motion_residual(&state_from(&v.as_slice()[..5]), &state_from(&v.as_slice()[5..]), &u, dt);
            DVector::from_column_slice(e.as_slice())
        };
        let numeric = fd_jacobian(f, &x, 1e-6);
        let analytic = DMatrix::from_column_slice(5, 10, motion_jacobian(&prev, &cur, &u, dt).as_slice());
        let err = max_rel_error(&analytic, &numeric, 1e-9);
        assert!(err <= 1e-5, "relative error {err}");
    }
}

#[test]
fn frozen_cell_observation_jacobian_matches_finite_differences() {
    let mut rng = rng(12);
    let g = grid();
    for _ in 0..100 {
        let map = random_map(&mut rng, g);
        let x = random_state(&mut rng, &g);
        let cell = g.cell_of(&x.position).unwrap();
        let f = ObservationFactor { step: 0, z: Vec2::new(0.2, -0.1), cell };
        let (_, h, nodes) = f.evaluate(&x, &map);
        let mut v: Vec<f64> = x.to_vector().iter().copied().collect();
        for &n in &nodes {
            v.extend(map.node_velocities[n].iter());
        }
        let resid = |y: &DVector<f64>| {
            let mut m = map.clone();
            for (q, &n) in nodes.iter().enumerate() {
                m.node_velocities[n] = Vec2::new(y[5 + 2 * q], y[6 + 2 * q]);
            }
            let e = f.residual(&state_from(&y.as_slice()[..5]), &m);
            DVector::from_column_slice(e.as_slice())
        };
        let numeric = fd_jacobian(resid, &DVector::from_vec(v), 1e-6);
        let analytic = DMatrix::from_column_slice(2, 13, h.as_slice());
        let err = max_rel_error(&analytic, &numeric, 1e-9);
        assert!(err <= 1e-5, "relative error {err}");
    }
}

#[test]
fn located_observation_matches_frozen_factor_inside_cell() {
    let mut rng = rng(13);
    let g = grid();
    for _ in 0..200 {
        let map = random_map(&mut rng, g);
        let x = random_state(&mut rng, &g);
        let z = AdcpSample { t: 0.0, rel_flow: Vec2::new(-0.1, 0.3) };
        let f = ObservationFactor { step: 0, z: z.rel_flow, cell: g.cell_of(&x.position).unwrap() };
        let (e, h, _) = f.evaluate(&x, &map);
        assert!((observation_residual(&x, &map, &z).unwrap() - e).norm() < 1e-15);
        assert!((observation_jacobian(&x, &map, &z).unwrap() - h).norm() < 1e-15);
    }
}

#[test]
fn node_blocks_are_weighted_rotations() {
    let g = grid();
    let map = FlowMap::zeros(g);
    let x = RobotState::new(Vec2::new(3.0, 4.0), Vec2::new(0.5, 0.0), 0.7);
    let (_, h, _) = ObservationFactor { step: 0, z: Vec2::zeros(), cell: (1, 1) }.evaluate(&x, &map);
    let r = flam::factors::rotation_to_body(0.7);
    // local (0.2, 0.6) in cell (1,1)
    let w = [0.8 * 0.4, 0.2 * 0.4, 0.8 * 0.6, 0.2 * 0.6];
    for (q, wq) in w.iter().enumerate() {
        let block = h.fixed_view::<2, 2>(0, 5 + 2 * q).into_owned();
        assert!((block + r * *wq).norm() < 1e-14);
    }
    // zero map: no position sensitivity
    assert!(h.fixed_view::<2, 2>(0, 0).norm() == 0.0);
}
