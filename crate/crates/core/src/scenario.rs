//! Run configuration and the two built-in case studies.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::flow_map::GridSpec;
use crate::flow_models::{FlowFieldSpec, FlowVariant, GyreParams, KsParams, DOMAIN_SLACK};
use crate::sim::{generate_trajectory, SensorNoise, TimedState, TrajectoryParams};
use crate::solver::SolverConfig;

const CASE1: &str = include_str!("presets/case1.json");
const CASE2: &str = include_str!("presets/case2.json");

pub const PRESETS: [&str; 2] = ["case1", "case2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub flow: FlowFieldSpec,
    pub grid: GridSpec,
    pub trajectory: TrajectoryParams,
    pub noise: SensorNoise,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Root of every random stream in the run, including the turbulence draw.
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "case1" => CASE1,
            "case2" => CASE2,
            other => {
                return Err(FlamError::config(format!(
                    "unknown preset '{other}' (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Self::from_json(text)
    }

    /// 10 m x 10 m steady single gyre, 5 x 5 grid, start (2, 8) heading south.
    pub fn case1() -> Self {
        Self::preset("case1").expect("embedded preset")
    }

    /// 20 m x 10 m double gyre with turbulence, 9 x 5 grid, start (3, 8) heading south.
    pub fn case2() -> Self {
        Self::preset("case2").expect("embedded preset")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| FlamError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Flow spec with the turbulence draw tied to the run seed.
    pub fn seeded_flow(&self) -> FlowFieldSpec {
        let mut flow = self.flow;
        if let Some(ks) = flow.ks.as_mut() {
            ks.rng_seed = self.seed;
        }
        flow
    }

    /// The time-invariant part of the flow, which is what the map estimates.
    pub fn steady_flow(&self) -> FlowFieldSpec {
        let mut flow = self.flow;
        if flow.variant == FlowVariant::TurbulentDoubleGyre {
            flow.variant = FlowVariant::DoubleGyre;
            flow.ks = None;
        }
        flow
    }

    pub fn turbulence(&self) -> Option<KsParams> {
        match self.flow.variant {
            FlowVariant::TurbulentDoubleGyre => self.seeded_flow().ks,
            _ => None,
        }
    }

    pub fn truth_trajectory(&self) -> Result<Vec<TimedState>> {
        generate_trajectory(&self.flow.domain, &self.trajectory)
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        self.grid.validate()?;
        self.noise.validate()?;
        self.solver.validate()?;
        let hull = self.grid.hull();
        let d = &self.flow.domain;
        let inside = |p: [f64; 2]| d.contains(&nalgebra::Vector2::new(p[0], p[1]), DOMAIN_SLACK);
        if !(inside(hull.min) && inside(hull.max)) {
            return Err(FlamError::config("grid extends beyond the flow domain"));
        }
        if (self.trajectory.dt - self.noise.ins_dt()).abs() > 1e-9 * self.trajectory.dt {
            return Err(FlamError::config("trajectory dt must equal the INS sample period"));
        }
        crate::sim::Lawnmower::new(d, &self.trajectory)?;
        Ok(())
    }
}

/// Presets as written out from code; kept in sync with the embedded JSON by a test.
pub fn builtin(name: &str) -> Option<Scenario> {
    let trajectory = |start: [f64; 2]| TrajectoryParams {
        start,
        heading: -FRAC_PI_2,
        v_max: 2.0,
        duration: 300.0,
        dt: 0.1,
        lane_spacing: 1.0,
    };
    let solver = SolverConfig { adaptive_damping: true, ..SolverConfig::default() };
    let gyre = GyreParams::default();
    match name {
        "case1" => {
            let flow = FlowFieldSpec::single_gyre(gyre);
            Some(Scenario {
                name: name.into(),
                grid: GridSpec::covering(&flow.domain, 5, 5).ok()?,
                flow,
                trajectory: trajectory([2.0, 8.0]),
                noise: SensorNoise::default_profile(),
                solver,
                seed: 0,
            })
        }
        "case2" => {
            let flow = FlowFieldSpec::turbulent_double_gyre(gyre, KsParams::default());
            Some(Scenario {
                name: name.into(),
                grid: GridSpec::covering(&flow.domain, 9, 5).ok()?,
                flow,
                trajectory: trajectory([3.0, 8.0]),
                noise: SensorNoise::default_profile(),
                solver,
                seed: 0,
            })
        }
        _ => None,
    }
}
