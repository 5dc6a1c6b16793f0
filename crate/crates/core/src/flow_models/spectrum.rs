//! Radially binned energy spectrum of a sampled turbulent field.
//!
//! The field is sampled on a square grid, tapered with a separable Hann window,
//! transformed with a 2D FFT, and the energy `(|U|^2 + |V|^2) / 2` is summed
//! into logarithmically spaced wavenumber shells. Shell energy divided by shell
//! width estimates `E(k)`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ks::{KsField, KsParams};
use crate::error::{FlamError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Samples per side; `None` picks the smallest power of two that resolves
    /// the largest mode wavenumber without aliasing.
    pub grid: Option<usize>,
    /// Side length of the sampled box (m); `None` uses the integral scale.
    pub box_len: Option<f64>,
    pub bins_per_decade: usize,
    pub time: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { grid: None, box_len: None, bins_per_decade: 10, time: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub k_lo: f64,
    pub k_hi: f64,
    /// Geometric center of the shell (rad/m).
    pub k: f64,
    /// Energy per unit wavenumber (m^3/s^2).
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub bins_used: usize,
    pub k_lo: f64,
    pub k_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub bins: Vec<SpectrumBin>,
    pub total_energy: f64,
    pub grid: usize,
    pub box_len: f64,
}

impl Spectrum {
    pub fn is_empty(&self) -> bool {
        self.total_energy <= 0.0
    }

    /// Least-squares line through `(log10 k, log10 E)` over shells lying wholly
    /// inside `[k_lo, k_hi]`.
    pub fn fit_slope(&self, k_lo: f64, k_hi: f64) -> Option<SlopeFit> {
        let pts: Vec<(f64, f64)> = self
            .bins
            .iter()
            .filter(|b| b.k_lo >= k_lo && b.k_hi <= k_hi && b.energy > 0.0)
            .map(|b| (b.k.log10(), b.energy.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        Some(SlopeFit { slope, intercept: my - slope * mx, bins_used: pts.len(), k_lo, k_hi })
    }

    /// Fit over the inertial range used for checking Kolmogorov scaling:
    /// `[4 pi / L, pi / (2 eta)]`.
    pub fn fit_inertial_range(&self, params: &KsParams) -> Option<SlopeFit> {
        self.fit_slope(2.0 * TAU / params.integral_scale, PI / (2.0 * params.kolmogorov_scale))
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect()
}

fn fft_2d(data: &mut [Complex64], n: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(n);
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(data, n);
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(data, n);
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Samples the field on an `n x n` grid and returns both velocity components
/// in row-major order (`y` rows, `x` columns).
fn sample(field: &KsField, n: usize, h: f64, t: f64) -> (Vec<f64>, Vec<f64>) {
    let coords: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    // Per-mode trig tables make each grid point a handful of multiply-adds.
    let tables: Vec<_> = field
        .modes()
        .iter()
        .map(|m| {
            let row_x: Vec<(f64, f64)> = coords
                .iter()
                .map(|&x| (m.wavevector.x * x + m.omega * t).sin_cos())
                .collect();
            let col_y: Vec<(f64, f64)> = coords.iter().map(|&y| (m.wavevector.y * y).sin_cos()).collect();
            (m, row_x, col_y)
        })
        .collect();

    let mut u = vec![0.0; n * n];
    let mut v = vec![0.0; n * n];
    u.par_chunks_mut(n)
        .zip(v.par_chunks_mut(n))
        .enumerate()
        .for_each(|(j, (urow, vrow))| {
            for (m, row_x, col_y) in &tables {
                let (sb, cb) = col_y[j];
                let perp = m.a.try_normalize(0.0).or_else(|| m.b.try_normalize(0.0));
                let Some(perp) = perp else { continue };
                let ca = m.a.dot(&perp);
                let cbb = m.b.dot(&perp);
                for (i, &(sa, cx)) in row_x.iter().enumerate() {
                    let c = cx * cb - sa * sb;
                    let s = sa * cb + cx * sb;
                    let amp = ca * c + cbb * s;
                    urow[i] += perp.x * amp;
                    vrow[i] += perp.y * amp;
                }
            }
        });
    (u, v)
}

pub fn estimate_spectrum(field: &KsField, params: &KsParams, cfg: &SpectrumConfig) -> Result<Spectrum> {
    let box_len = cfg.box_len.unwrap_or(params.integral_scale);
    if !(box_len > 0.0) || cfg.bins_per_decade == 0 {
        return Err(FlamError::config("spectrum box and bin density must be positive"));
    }
    let n = match cfg.grid {
        Some(n) if n >= 8 => n,
        Some(_) => return Err(FlamError::config("spectrum grid must have at least 8 samples per side")),
        None => {
            // Nyquist pi n / box must exceed the largest mode wavenumber.
            let need = (box_len * params.k_max() / PI).ceil() as usize + 1;
            need.next_power_of_two().max(64)
        }
    };
    let h = box_len / n as f64;
    let (u, v) = sample(field, n, h, cfg.time);

    let w = hann(n);
    let w2_mean = {
        let m = w.iter().map(|x| x * x).sum::<f64>() / n as f64;
        m * m
    };

    let dk = TAU / box_len;
    let k_nyq = PI / h;
    let decades = (k_nyq / dk).log10();
    let n_bins = (decades * cfg.bins_per_decade as f64).ceil() as usize;
    let edge = |i: usize| dk * 10f64.powf(i as f64 / cfg.bins_per_decade as f64);
    let mut shell_energy = vec![0.0; n_bins];
    let mut total = 0.0;

    let mut planner = FftPlanner::new();
    let norm = 1.0 / ((n * n) as f64).powi(2) / w2_mean;
    for comp in [&u, &v] {
        let mut buf: Vec<Complex64> = comp
            .iter()
            .enumerate()
            .map(|(idx, &x)| Complex64::new(x * w[idx / n] * w[idx % n], 0.0))
            .collect();
        fft_2d(&mut buf, n, &mut planner);
        for (idx, c) in buf.iter().enumerate() {
            let e = 0.5 * c.norm_sqr() * norm;
            total += e;
            let (row, col) = (idx / n, idx % n);
            let signed = |m: usize| if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let k = dk * signed(row).hypot(signed(col));
            if k < dk {
                continue;
            }
            let bin = ((k / dk).log10() * cfg.bins_per_decade as f64).floor() as usize;
            if bin < n_bins {
                shell_energy[bin] += e;
            }
        }
    }

    let bins = shell_energy
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let (lo, hi) = (edge(i), edge(i + 1));
            SpectrumBin { k_lo: lo, k_hi: hi, k: (lo * hi).sqrt(), energy: e / (hi - lo) }
        })
        .collect();
    Ok(Spectrum { bins, total_energy: total, grid: n, box_len })
}
