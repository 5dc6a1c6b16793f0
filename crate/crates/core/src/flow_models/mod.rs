//! Analytic ground-truth flow fields.

mod gyre;
mod ks;
pub mod spectrum;

pub use gyre::{double_gyre_velocity, single_gyre_velocity, GyreParams, DOMAIN_SLACK};
pub use ks::{ks_velocity, KsField, KsMode, KsParams};

use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::geometry::{Rect, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum FlowVariant {
    /// Steady left half of the double gyre, `[0, L]^2`.
    SingleGyre,
    /// Double gyre at `t = 0` on `[0, 2L] x [0, L]`.
    DoubleGyre,
    /// Steady double gyre plus unsteady kinematic-simulation turbulence.
    TurbulentDoubleGyre,
    /// Spatially uniform flow; bilinear maps represent it exactly.
    Uniform { velocity: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowFieldSpec {
    #[serde(flatten)]
    pub variant: FlowVariant,
    pub gyre: GyreParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsParams>,
    pub domain: Rect,
}

impl FlowFieldSpec {
    pub fn single_gyre(gyre: GyreParams) -> Self {
        Self { variant: FlowVariant::SingleGyre, gyre, ks: None, domain: gyre.single_domain() }
    }

    pub fn double_gyre(gyre: GyreParams) -> Self {
        Self { variant: FlowVariant::DoubleGyre, gyre, ks: None, domain: gyre.double_domain() }
    }

    pub fn turbulent_double_gyre(gyre: GyreParams, ks: KsParams) -> Self {
        Self {
            variant: FlowVariant::TurbulentDoubleGyre,
            gyre,
            ks: Some(ks),
            domain: gyre.double_domain(),
        }
    }

    pub fn uniform(velocity: Vec2, domain: Rect) -> Self {
        Self {
            variant: FlowVariant::Uniform { velocity: [velocity.x, velocity.y] },
            gyre: GyreParams::default(),
            ks: None,
            domain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.domain.is_valid() {
            return Err(FlamError::config("flow domain must have positive size"));
        }
        match self.variant {
            FlowVariant::Uniform { velocity } => {
                if !velocity.iter().all(|v| v.is_finite()) {
                    return Err(FlamError::config("uniform flow velocity must be finite"));
                }
            }
            FlowVariant::SingleGyre | FlowVariant::DoubleGyre => self.gyre.validate()?,
            FlowVariant::TurbulentDoubleGyre => {
                self.gyre.validate()?;
                self.ks
                    .as_ref()
                    .ok_or_else(|| FlamError::config("turbulent flow requires turbulence parameters"))?
                    .validate()?;
            }
        }
        Ok(())
    }
}

/// A flow field ready for repeated evaluation (turbulent modes drawn once).
#[derive(Debug, Clone)]
pub struct FlowField {
    spec: FlowFieldSpec,
    ks: Option<KsField>,
}

impl FlowField {
    pub fn new(spec: &FlowFieldSpec) -> Result<Self> {
        spec.validate()?;
        let ks = match (spec.variant, &spec.ks) {
            (FlowVariant::TurbulentDoubleGyre, Some(ks)) => Some(KsField::new(ks)?),
            _ => None,
        };
        Ok(Self { spec: *spec, ks })
    }

    pub fn spec(&self) -> &FlowFieldSpec {
        &self.spec
    }

    /// Inertial flow velocity at `p` and time `t`. Gyre components are the
    /// steady `t = 0` fields; only turbulence depends on `t`.
    pub fn velocity(&self, p: &Vec2, t: f64) -> Result<Vec2> {
        if !self.spec.domain.contains(p, DOMAIN_SLACK) {
            return Err(FlamError::OutOfDomain { x: p.x, y: p.y });
        }
        let q = self.spec.domain.clamp(p);
        Ok(match self.spec.variant {
            FlowVariant::Uniform { velocity } => Vec2::new(velocity[0], velocity[1]),
            FlowVariant::SingleGyre => single_gyre_velocity(&q, &self.spec.gyre)?,
            FlowVariant::DoubleGyre => double_gyre_velocity(&q, 0.0, &self.spec.gyre)?,
            FlowVariant::TurbulentDoubleGyre => {
                let steady = double_gyre_velocity(&q, 0.0, &self.spec.gyre)?;
                steady + self.ks.as_ref().map_or(Vec2::zeros(), |ks| ks.velocity(&q, t))
            }
        })
    }

    pub fn turbulence(&self) -> Option<&KsField> {
        self.ks.as_ref()
    }
}

/// One-shot evaluation; builds the turbulent modes on every call.
pub fn field_velocity(spec: &FlowFieldSpec, p: &Vec2, t: f64) -> Result<Vec2> {
    FlowField::new(spec)?.velocity(p, t)
}
