//! Kinematic-simulation turbulence: a finite sum of random, incompressible
//! Fourier modes whose amplitudes follow a `k^(-5/3)` energy spectrum.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlamError, Result};
use crate::geometry::Vec2;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsParams {
    /// Largest eddy scale (m); sets the smallest wavenumber `2 pi / L`.
    pub integral_scale: f64,
    /// Smallest eddy scale (m); sets the largest wavenumber `2 pi / eta`.
    pub kolmogorov_scale: f64,
    pub n_modes: usize,
    /// RMS speed of the turbulent component (m/s).
    pub u_rms: f64,
    /// Scales mode frequencies `w_n = lambda sqrt(k_n^3 E(k_n))`.
    pub unsteadiness: f64,
    pub rng_seed: u64,
}

impl Default for KsParams {
    fn default() -> Self {
        Self {
            integral_scale: 1.0,
            kolmogorov_scale: 1e-3,
            n_modes: 128,
            u_rms: 0.05,
            unsteadiness: 0.5,
            rng_seed: 0,
        }
    }
}

impl KsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kolmogorov_scale > 0.0 && self.integral_scale > self.kolmogorov_scale) {
            return Err(FlamError::config(
                "turbulence scales must satisfy integral_scale > kolmogorov_scale > 0",
            ));
        }
        if self.n_modes == 1 {
            return Err(FlamError::config("turbulence needs at least two modes (or zero)"));
        }
        if !(self.u_rms >= 0.0) || !(self.unsteadiness >= 0.0) {
            return Err(FlamError::config("turbulence intensity and unsteadiness must be nonnegative"));
        }
        Ok(())
    }

    pub fn reynolds_number(&self) -> f64 {
        self.integral_scale / self.kolmogorov_scale
    }

    pub fn k_min(&self) -> f64 {
        TAU / self.integral_scale
    }

    pub fn k_max(&self) -> f64 {
        TAU / self.kolmogorov_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsMode {
    pub wavevector: Vec2,
    /// Cosine coefficient, perpendicular to `wavevector`.
    pub a: Vec2,
    /// Sine coefficient, perpendicular to `wavevector`.
    pub b: Vec2,
    pub omega: f64,
}

/// A realized turbulent field. Construction draws all random quantities once;
/// evaluation is a pure function of `(p, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KsField {
    modes: Vec<KsMode>,
}

impl KsField {
    pub fn new(params: &KsParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_modes;
        if n == 0 {
            return Ok(Self { modes: Vec::new() });
        }
        let (k_min, k_max) = (params.k_min(), params.k_max());
        let ratio = (k_max / k_min).powf(1.0 / (n - 1) as f64);
        let log_ratio = ratio.ln();

        let k: Vec<f64> = (0..n)
            .map(|i| if i + 1 == n { k_max } else { k_min * ratio.powi(i as i32) })
            .collect();
        // Unnormalized E(k) dk with geometric bin widths dk = k ln(ratio);
        // scaled so the kinetic energy sum E dk equals u_rms^2 / 2.
        let shell: Vec<f64> = k.iter().map(|&k| k.powf(-5.0 / 3.0) * k * log_ratio).collect();
        let scale = 0.5 * params.u_rms * params.u_rms / shell.iter().sum::<f64>();

        let mut rng = rng::stream(params.rng_seed, Stream::Turbulence);
        let modes = k
            .iter()
            .zip(&shell)
            .map(|(&k, &dk_energy)| {
                let theta = rng.random::<f64>() * TAU;
                let phase = rng.random::<f64>() * TAU;
                let (st, ct) = theta.sin_cos();
                let dir = Vec2::new(ct, st);
                let perp = Vec2::new(-st, ct);
                // Mean square speed of the mode is amp^2 / 2 = 2 E dk.
                let amp = (4.0 * scale * dk_energy).sqrt();
                let spectrum = scale * k.powf(-5.0 / 3.0);
                KsMode {
                    wavevector: dir * k,
                    a: perp * (amp * phase.cos()),
                    b: perp * (amp * phase.sin()),
                    omega: params.unsteadiness * (k.powi(3) * spectrum).sqrt(),
                }
            })
            .collect();
        Ok(Self { modes })
    }

    pub fn modes(&self) -> &[KsMode] {
        &self.modes
    }

    pub fn velocity(&self, p: &Vec2, t: f64) -> Vec2 {
        self.modes.iter().fold(Vec2::zeros(), |acc, m| {
            let (s, c) = (m.wavevector.dot(p) + m.omega * t).sin_cos();
            acc + m.a * c + m.b * s
        })
    }

    /// Sum over modes of the mean kinetic energy `(|a|^2 + |b|^2) / 4`.
    pub fn mean_energy(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| 0.25 * (m.a.norm_squared() + m.b.norm_squared()))
            .sum()
    }
}

/// Builds the field and evaluates it once. Prefer [`KsField`] for repeated queries.
pub fn ks_velocity(p: &Vec2, t: f64, params: &KsParams) -> Result<Vec2> {
    Ok(KsField::new(params)?.velocity(p, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_modes_is_zero_field() {
        let params = KsParams { n_modes: 0, ..Default::default() };
        assert_eq!(ks_velocity(&Vec2::new(1.0, 2.0), 3.0, &params).unwrap(), Vec2::zeros());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let params = KsParams { rng_seed: 42, ..Default::default() };
        let p = Vec2::new(0.37, 8.1);
        let a = ks_velocity(&p, 1.5, &params).unwrap();
        let b = ks_velocity(&p, 1.5, &params).unwrap();
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.y.to_bits(), b.y.to_bits());
        let other = ks_velocity(&p, 1.5, &KsParams { rng_seed: 43, ..params }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn modes_are_incompressible() {
        let field = KsField::new(&KsParams::default()).unwrap();
        for m in field.modes() {
            let scale = m.wavevector.norm();
            assert!(m.a.dot(&m.wavevector).abs() <= 1e-12 * scale);
            assert!(m.b.dot(&m.wavevector).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn wavenumbers_span_the_inertial_range_geometrically() {
        let params = KsParams::default();
        let field = KsField::new(&params).unwrap();
        let k: Vec<f64> = field.modes().iter().map(|m| m.wavevector.norm()).collect();
        assert!((k[0] - params.k_min()).abs() < 1e-9);
        assert!((k[k.len() - 1] - params.k_max()).abs() < 1e-6);
        let r0 = k[1] / k[0];
        for w in k.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_normalized_to_intensity() {
        let params = KsParams { u_rms: 0.2, ..Default::default() };
        let field = KsField::new(&params).unwrap();
        assert!((field.mean_energy() - 0.5 * 0.04).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_rms_speed_matches_intensity() {
        let params = KsParams { u_rms: 0.05, rng_seed: 5, ..Default::default() };
        let field = KsField::new(&params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mean_sq: f64 = (0..n)
            .map(|_| {
                let p = Vec2::new(rng.random::<f64>() * 20.0, rng.random::<f64>() * 10.0);
                field.velocity(&p, 0.0).norm_squared()
            })
            .sum::<f64>()
            / n as f64;
        let rms = mean_sq.sqrt();
        assert!((rms - 0.05).abs() < 0.1 * 0.05, "rms {rms}");
    }

    #[test]
    fn divergence_is_negligible() {
        let params = KsParams { rng_seed: 3, ..Default::default() };
        let field = KsField::new(&params).unwrap();
        let bound = 1e-6 * params.u_rms * params.k_max();
        let h = 1e-7;
        for i in 0..50 {
            let p = Vec2::new(i as f64 * 0.173, i as f64 * 0.0911);
            let t = i as f64 * 0.05;
            let div = (field.velocity(&(p + Vec2::new(h, 0.0)), t).x
                - field.velocity(&(p - Vec2::new(h, 0.0)), t).x
                + field.velocity(&(p + Vec2::new(0.0, h)), t).y
                - field.velocity(&(p - Vec2::new(0.0, h)), t).y)
                / (2.0 * h);
            assert!(div.abs() <= bound, "div {div}");
        }
    }

    #[test]
    fn validation() {
        assert!(KsParams { n_modes: 1, ..Default::default() }.validate().is_err());
        assert!(KsParams { kolmogorov_scale: 2.0, ..Default::default() }.validate().is_err());
        assert!(KsParams { u_rms: -1.0, ..Default::default() }.validate().is_err());
        assert!((KsParams::default().reynolds_number() - 1e3).abs() < 1e-9);
    }
}
