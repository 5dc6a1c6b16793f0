//! Flow-based localization and mapping (FLAM).
//!
//! A vehicle moving through an unknown, steady background flow estimates its
//! full trajectory together with a gridded map of the flow, using inertial
//! measurements and body-frame relative-flow observations. The estimate is the
//! minimizer of a sparse nonlinear least-squares problem solved by damped
//! Gauss-Newton with a conjugate-gradient inner solver.
//!
//! Module map:
//!
//! - [`flow_models`]: analytic ground-truth fields (gyres, kinematic-simulation turbulence)
//! - [`flow_map`]: the gridded flow representation and bilinear interpolation
//! - [`sim`]: trajectories, noisy sensor logs, dead reckoning
//! - [`factors`]: motion and observation residuals with analytic Jacobians
//! - [`solver`]: information-form assembly, CG, Gauss-Newton, LSF initialization
//! - [`metrics`]: trajectory and map error reports
//! - [`scenario`] / [`io`]: run configuration, presets and on-disk formats
//! - [`pipeline`]: simulate, solve and evaluate runs end to end

pub mod error;
pub mod factors;
pub mod flow_map;
pub mod flow_models;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{FlamError, Result};
pub use geometry::{Rect, Vec2};
