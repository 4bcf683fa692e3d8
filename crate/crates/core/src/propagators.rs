//! Exact Fourier-space flows of the free wave and free Klein-Gordon
//! equations and the half-wave phase operators.

use crate::spectral::{lp, norm2, Grid, Spectrum};
use crate::{Error, Result, C64};

/// Data `(n(t0), dt n(t0))` of the free wave part of the density.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeWaveData {
    pub n0: Spectrum,
    pub n1: Spectrum,
    pub t0: f64,
}

impl FreeWaveData {
    /// `n1_hat(0)`, the conserved momentum of the density.
    pub fn moment(&self) -> f64 {
        self.n1.0[Grid::ZERO_MODE].re
    }
}

/// Per-mode coefficients of the exact flow over a fixed time `tau` of
/// `u_tt - Laplace u + mass u = 0`.
#[derive(Clone, Debug)]
pub struct FlowTable {
    cos: Vec<f64>,
    sin_over_freq: Vec<f64>,
    freq_sin: Vec<f64>,
}

impl FlowTable {
    pub fn new(grid: &Grid, mass: f64, tau: f64) -> Self {
        let len = grid.len();
        let mut cos = Vec::with_capacity(len);
        let mut sin_over_freq = Vec::with_capacity(len);
        let mut freq_sin = Vec::with_capacity(len);
        for i in 0..len {
            let w = (mass + norm2(grid.xi(i)).powi(2)).sqrt();
            let (s, c) = (w * tau).sin_cos();
            cos.push(c);
            sin_over_freq.push(if w == 0.0 { tau } else { s / w });
            freq_sin.push(w * s);
        }
        FlowTable { cos, sin_over_freq, freq_sin }
    }

    pub fn apply(&self, u: &mut [C64], ut: &mut [C64]) {
        for i in 0..u.len() {
            let (a, b) = (u[i], ut[i]);
            u[i] = a * self.cos[i] + b * self.sin_over_freq[i];
            ut[i] = b * self.cos[i] - a * self.freq_sin[i];
        }
    }
}

/// Exact flow of the linear equation with the given mass over time `tau`.
pub fn linear_flow(grid: &Grid, mass: f64, u: &Spectrum, ut: &Spectrum, tau: f64) -> (Spectrum, Spectrum) {
    let (mut a, mut b) = (u.clone(), ut.clone());
    FlowTable::new(grid, mass, tau).apply(&mut a.0, &mut b.0);
    (a, b)
}

/// Free wave `l(t)` and `dt l(t)` from data at `t0`.
pub fn free_wave_evolve(grid: &Grid, data: &FreeWaveData, t: f64) -> Result<(Spectrum, Spectrum)> {
    if t < data.t0 {
        return Err(Error::TimeBeforeStart { t, t0: data.t0 });
    }
    Ok(linear_flow(grid, 0.0, &data.n0, &data.n1, t - data.t0))
}

/// Free Klein-Gordon solution at `t` from data `(v0, v1)` at `t0`.
pub fn free_kg_evolve(grid: &Grid, v0: &Spectrum, v1: &Spectrum, t0: f64, t: f64) -> Result<(Spectrum, Spectrum)> {
    if t < t0 {
        return Err(Error::TimeBeforeStart { t, t0 });
    }
    Ok(linear_flow(grid, 1.0, v0, v1, t - t0))
}

/// Multiplies by `e^{sign i t |xi|}` (mass 0) or `e^{sign i t <xi>}` (mass 1).
pub fn half_phase(grid: &Grid, s: &Spectrum, sign: f64, t: f64, mass: f64) -> Spectrum {
    grid.apply(s, |xi| {
        let w = (mass + xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        C64::from_polar(1.0, sign * t * w)
    })
}

/// Profile `g_+ = e^{i t |D|} (dt - i |D|) l` of the free wave, which is
/// constant in time: `e^{i t0 |xi|} (n1_hat - i |xi| n0_hat)`.
pub fn g_profile(grid: &Grid, data: &FreeWaveData) -> Spectrum {
    Spectrum(
        (0..grid.len())
            .map(|i| {
                let w = norm2(grid.xi(i));
                C64::from_polar(1.0, data.t0 * w) * (data.n1.0[i] - C64::new(0.0, w) * data.n0.0[i])
            })
            .collect(),
    )
}

/// Low and high frequency parts of the free wave at time `t`.
pub fn free_wave_split(grid: &Grid, data: &FreeWaveData, t: f64, p: f64) -> Result<(Spectrum, Spectrum)> {
    let (l, _) = free_wave_evolve(grid, data, t)?;
    lp::lowfreq_split(grid, &l, t, p)
}
