//! Modified scattering toolkit for the electric field: profiles, the phase
//! correction along rays, the residual terms of the modified profile,
//! Cauchy increments over dyadic windows and the energy cascade of the
//! density.

use crate::diagnostics::{fit_rate, z_weight, FitModel};
use crate::evolution::{evolve_with, make_initial_data, Companion, InitialDataParams, N1Shape, Schedule, SpectralState};
use crate::propagators::{free_wave_evolve, half_phase, FreeWaveData};
use crate::spectral::{bracket, lp, norm2, Field, Grid, Spectrum};
use crate::special::{j0_unchecked, simpson};
use crate::{Error, Result, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn each<T>(f: impl Fn(usize) -> T) -> [T; 2] {
    [f(0), f(1)]
}

/// `f_+ = e^{it<D>}(dt - i<D>)E` (`sign = 1`) or `f_- = e^{-it<D>}(dt + i<D>)E`.
pub fn profile_f(grid: &Grid, s: &SpectralState, sign: f64) -> [Spectrum; 2] {
    each(|c| {
        let half = crate::diagnostics::half_wave_part(grid, &s.e[c], &s.et[c], sign);
        half_phase(grid, &half, sign, s.t, 1.0)
    })
}

/// `E = i (e^{-it<D>} f_+ - e^{it<D>} f_-) / (2 <D>)`.
pub fn reconstruct_field(grid: &Grid, t: f64, plus: &[Spectrum; 2], minus: &[Spectrum; 2]) -> [Spectrum; 2] {
    each(|c| {
        let a = half_phase(grid, &plus[c], -1.0, t, 1.0);
        let b = half_phase(grid, &minus[c], 1.0, t, 1.0);
        grid.apply(&a.sub(&b), |xi| I / (2.0 * bracket(norm2(xi))))
    })
}

/// `h_+ = e^{it<D>}(dt - i<D>)(nE)` and its sign-flipped partner, with
/// `dt(nE) = n_t E + n E_t`.
pub fn profile_h(grid: &Grid, s: &SpectralState, sign: f64) -> [Spectrum; 2] {
    let (n, nt) = (grid.inverse(&s.n), grid.inverse(&s.nt));
    each(|c| {
        let (e, et) = (grid.inverse(&s.e[c]), grid.inverse(&s.et[c]));
        let ne = grid.product(&n, &e);
        let dne = grid.product(&nt, &e).add(&grid.product(&n, &et));
        half_phase(grid, &crate::diagnostics::half_wave_part(grid, &ne, &dne, sign), sign, s.t, 1.0)
    })
}

/// `dt h_+-`: `e^{+-it<D>}` applied to `Laplace|E|^2 E - n^2 E + 2 n_t E_t - 2 grad n . grad E`.
pub fn h_source(grid: &Grid, s: &SpectralState, sign: f64) -> [Spectrum; 2] {
    let n = grid.inverse(&s.n);
    let nt = grid.inverse(&s.nt);
    let lap_dens = grid.inverse(&grid.laplacian(&s.density(grid)));
    let dn = each(|a| grid.inverse(&grid.derivative(&s.n, a)));
    each(|c| {
        let (e, et) = (grid.inverse(&s.e[c]), grid.inverse(&s.et[c]));
        let mut src = lap_dens.mul(&e).sub(&n.mul(&n).mul(&e));
        src.axpy(2.0, &nt.mul(&et));
        for (a, dna) in dn.iter().enumerate() {
            src.axpy(-2.0, &dna.mul(&grid.inverse(&grid.derivative(&s.e[c], a))));
        }
        half_phase(grid, &grid.dealias(&grid.forward(&src)), sign, s.t, 1.0)
    })
}

/// Low-frequency part `l_L(s, x)` of the free wave, where the cutoff is
/// `psi(|eta| <s>^p)`.
pub trait LowFrequencyWave: Sync {
    fn t0(&self) -> f64;
    /// Values at time `s` and the given points.
    fn eval(&self, s: f64, points: &[[f64; 2]]) -> Vec<f64>;
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("low-frequency exponent p = {p} must lie in (0, 1)")));
    }
    Ok(())
}

/// Direct trigonometric sum over the lattice modes inside the cutoff.
#[derive(Clone, Debug)]
pub struct LatticeLowWave {
    /// `(eta, |eta|, n0_hat, n1_hat)` sorted by `|eta|`, restricted to `|eta| < 2`.
    modes: Vec<([f64; 2], f64, C64, C64)>,
    cell: f64,
    p: f64,
    t0: f64,
}

impl LatticeLowWave {
    pub fn new(grid: &Grid, data: &FreeWaveData, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let mut modes: Vec<_> = (0..grid.len())
            .filter(|&i| !grid.on_nyquist(i))
            .map(|i| {
                let xi = grid.xi(i);
                (xi, norm2(xi), data.n0.0[i], data.n1.0[i])
            })
            .filter(|m| m.1 < 2.0 && (m.2.norm() > 0.0 || m.3.norm() > 0.0))
            .collect();
        modes.sort_by(|a, b| a.1.total_cmp(&b.1));
        Ok(LatticeLowWave { modes, cell: (grid.dxi() / (2.0 * PI)).powi(2), p, t0: data.t0 })
    }

    fn coefficients(&self, s: f64) -> Vec<([f64; 2], C64)> {
        let scale = bracket(s).powf(self.p);
        let tau = s - self.t0;
        self.modes
            .iter()
            .take_while(|m| m.1 * scale < 2.0)
            .map(|&(eta, r, n0, n1)| {
                let sinc = if r == 0.0 { tau } else { (tau * r).sin() / r };
                let w = lp::psi(r * scale) * self.cell;
                (eta, (n0 * (tau * r).cos() + n1 * sinc) * w)
            })
            .collect()
    }
}

impl LowFrequencyWave for LatticeLowWave {
    fn t0(&self) -> f64 {
        self.t0
    }

    fn eval(&self, s: f64, points: &[[f64; 2]]) -> Vec<f64> {
        let coeffs = self.coefficients(s);
        points
            .par_iter()
            .map(|x| coeffs.iter().map(|(eta, c)| (c * C64::from_polar(1.0, eta[0] * x[0] + eta[1] * x[1])).re).sum())
            .collect()
    }
}

/// Radial data in closed form: `n0 = a e^{-|x|^2/r^2}` and the Gaussian or
/// Mexican-hat velocity of the initial-data generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuumRadialWave {
    pub n0_amplitude: f64,
    pub radius_n: f64,
    pub n1_shape: N1Shape,
    pub moment: f64,
    pub n1_amplitude: f64,
    pub t0: f64,
    pub p: f64,
    /// Simpson panels in `|eta|`.
    pub panels: usize,
}

impl ContinuumRadialWave {
    pub fn from_params(params: &InitialDataParams, p: f64, panels: usize) -> Result<Self> {
        check_exponent(p)?;
        if params.n1_shape == N1Shape::Dipole {
            return Err(Error::InvalidArgument("the dipole velocity is not radial".into()));
        }
        Ok(ContinuumRadialWave {
            n0_amplitude: params.n0_amplitude,
            radius_n: params.radius_n,
            n1_shape: params.n1_shape,
            moment: params.moment,
            n1_amplitude: params.n1_amplitude,
            t0: params.t0,
            p,
            panels: panels.max(2) + panels % 2,
        })
    }

    pub fn n0_hat(&self, rho: f64) -> f64 {
        let r2 = self.radius_n * self.radius_n;
        self.n0_amplitude * PI * r2 * (-r2 * rho * rho / 4.0).exp()
    }

    pub fn n1_hat(&self, rho: f64) -> f64 {
        let r2 = self.radius_n * self.radius_n;
        let g = (-r2 * rho * rho / 4.0).exp();
        match self.n1_shape {
            N1Shape::Gaussian => self.moment * g,
            _ => self.n1_amplitude * PI * r2 * (r2 * rho * rho / 4.0) * g,
        }
    }
}

impl LowFrequencyWave for ContinuumRadialWave {
    fn t0(&self) -> f64 {
        self.t0
    }

    /// `(2 pi)^{-1} int psi(rho <s>^p) l_hat(s, rho) J0(rho |x|) rho d rho`.
    fn eval(&self, s: f64, points: &[[f64; 2]]) -> Vec<f64> {
        let scale = bracket(s).powf(self.p);
        let top = 2.0 / scale;
        let h = top / self.panels as f64;
        let tau = s - self.t0;
        let nodes: Vec<(f64, f64)> = (0..=self.panels)
            .map(|i| {
                let rho = i as f64 * h;
                let w = if i == 0 || i == self.panels { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let sinc = if rho == 0.0 { tau } else { (tau * rho).sin() / rho };
                let lhat = self.n0_hat(rho) * (tau * rho).cos() + self.n1_hat(rho) * sinc;
                (rho, w * h / 3.0 * lp::psi(rho * scale) * lhat * rho / (2.0 * PI))
            })
            .collect();
        points
            .par_iter()
            .map(|x| {
                let r = norm2(*x);
                nodes.iter().map(|&(rho, c)| c * j0_unchecked(rho * r)).sum()
            })
            .collect()
    }
}

/// Normalization of the phase: the displayed `2 pi^2 <xi>^{-1} int l_L`
/// whose slope at zero frequency is `pi n1_hat(0)`, or the factor `1/2`
/// under which the residual identity holds with the Fourier convention in
/// use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseNormalization {
    Printed,
    Dynamical,
}

impl PhaseNormalization {
    pub fn factor(self) -> f64 {
        match self {
            PhaseNormalization::Printed => 2.0 * PI * PI,
            PhaseNormalization::Dynamical => 0.5,
        }
    }
}

fn ray_points(s: f64, xis: &[[f64; 2]]) -> Vec<[f64; 2]> {
    xis.iter()
        .map(|xi| {
            let b = bracket(norm2(*xi));
            [s * xi[0] / b, s * xi[1] / b]
        })
        .collect()
}

/// `dt Theta(t, xi)` for each frequency.
pub fn theta_rate(wave: &dyn LowFrequencyWave, t: f64, xis: &[[f64; 2]], norm: PhaseNormalization) -> Vec<f64> {
    let vals = wave.eval(t, &ray_points(t, xis));
    xis.iter().zip(vals).map(|(xi, v)| norm.factor() / bracket(norm2(*xi)) * v).collect()
}

/// Phase correction on a time schedule and a set of frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTable {
    pub times: Vec<f64>,
    pub xis: Vec<[f64; 2]>,
    /// Lattice indices of the frequencies, when they come from a grid.
    pub lattice: Option<Vec<usize>>,
    /// `values[i][j] = Theta(times[i], xis[j])`.
    pub values: Vec<Vec<f64>>,
    pub normalization: PhaseNormalization,
    pub ds: f64,
}

impl PhaseTable {
    /// Composite Simpson in time between consecutive schedule entries, with
    /// step at most `ds`. The first time must be `t0`.
    pub fn build(
        wave: &dyn LowFrequencyWave,
        times: &[f64],
        xis: Vec<[f64; 2]>,
        norm: PhaseNormalization,
        ds: f64,
    ) -> Result<Self> {
        if !(ds > 0.0) || times.is_empty() {
            return Err(Error::InvalidArgument("phase table needs a time schedule and ds > 0".into()));
        }
        if times[0] != wave.t0() {
            return Err(Error::InvalidArgument(format!("phase schedule starts at {} instead of t0 = {}", times[0], wave.t0())));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("phase schedule must increase".into()));
        }
        let mut values = vec![vec![0.0; xis.len()]];
        for w in times.windows(2) {
            let panels = (((w[1] - w[0]) / ds).ceil() as usize).max(2);
            let panels = panels + panels % 2;
            let h = (w[1] - w[0]) / panels as f64;
            let mut acc = values.last().expect("seeded").clone();
            for i in 0..=panels {
                let weight = if i == 0 || i == panels { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let rate = theta_rate(wave, w[0] + i as f64 * h, &xis, norm);
                for (a, r) in acc.iter_mut().zip(rate) {
                    *a += weight * h / 3.0 * r;
                }
            }
            values.push(acc);
        }
        Ok(PhaseTable { times: times.to_vec(), xis, lattice: None, values, normalization: norm, ds })
    }

    /// Table over the in-band lattice frequencies with `|xi| <= radius`.
    pub fn for_lattice(
        grid: &Grid,
        wave: &dyn LowFrequencyWave,
        times: &[f64],
        radius: f64,
        norm: PhaseNormalization,
        ds: f64,
    ) -> Result<Self> {
        let idx = lattice_subset(grid, radius);
        let xis = idx.iter().map(|&i| grid.xi(i)).collect();
        let mut table = Self::build(wave, times, xis, norm, ds)?;
        table.lattice = Some(idx);
        Ok(table)
    }

    fn row(&self, t: f64) -> Result<&[f64]> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| self.values[i].as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("time {t} is not in the phase table")))
    }
}

/// In-band lattice indices with `|xi| <= radius`, off the Nyquist lines.
pub fn lattice_subset(grid: &Grid, radius: f64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| grid.in_band(i, grid.dealias_fraction()) && !grid.on_nyquist(i) && norm2(grid.xi(i)) <= radius)
        .collect()
}

/// Plain profiles `f_+` on a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSeries {
    pub times: Vec<f64>,
    pub profiles: Vec<[Spectrum; 2]>,
}

impl ProfileSeries {
    pub fn push(&mut self, grid: &Grid, s: &SpectralState) {
        self.times.push(s.t);
        self.profiles.push(profile_f(grid, s, 1.0));
    }
}

/// `f_* = e^{i Theta} f_+` on the tabulated lattice frequencies; elsewhere
/// the profile is left unmodified.
pub fn modified_profile(series: &ProfileSeries, table: &PhaseTable) -> Result<ProfileSeries> {
    let idx = table
        .lattice
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("modified profile needs a lattice phase table".into()))?;
    let mut out = ProfileSeries { times: series.times.clone(), profiles: Vec::with_capacity(series.times.len()) };
    for (t, f) in series.times.iter().zip(&series.profiles) {
        let row = table.row(*t)?;
        let mut g = f.clone();
        for c in 0..2 {
            for (&i, &theta) in idx.iter().zip(row) {
                g[c].0[i] = f[c].0[i] * C64::from_polar(1.0, theta);
            }
        }
        out.profiles.push(g);
    }
    Ok(out)
}

/// Largest weighted band increment of a profile over one dyadic window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowIncrement {
    pub m: i32,
    pub value: f64,
}

/// Weighted Littlewood-Paley increments `sup_k w_k ||phi_k (f(t2) - f(t1))||`
/// over pairs of snapshots in each window `[2^m, 2^{m+1}]`.
pub fn cauchy_increments(
    grid: &Grid,
    series: &ProfileSeries,
    windows: &[i32],
    bands: std::ops::RangeInclusive<i32>,
    c_e: f64,
    d_e: f64,
) -> Result<Vec<WindowIncrement>> {
    let (first, last) = match (series.times.first(), series.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::InvalidArgument("empty profile series".into())),
    };
    let mut out = Vec::new();
    for &m in windows {
        let (a, b) = ((m as f64).exp2(), (m as f64 + 1.0).exp2());
        if first > a + 1e-9 || last < b - 1e-9 {
            return Err(Error::InvalidArgument(format!("window [{a}, {b}] lies outside the run [{first}, {last}]")));
        }
        let members: Vec<usize> = (0..series.times.len())
            .filter(|&i| series.times[i] >= a - 1e-9 && series.times[i] <= b + 1e-9)
            .collect();
        let mut pairs = Vec::new();
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                pairs.push((i, j));
            }
        }
        let value = pairs
            .par_iter()
            .map(|&(i, j)| {
                let diff: Vec<Spectrum> = (0..2).map(|c| series.profiles[j][c].sub(&series.profiles[i][c])).collect();
                bands
                    .clone()
                    .map(|k| z_weight(k, c_e, d_e) * crate::diagnostics::band_norm(grid, &diff, k))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        out.push(WindowIncrement { m, value });
    }
    Ok(out)
}

/// Geometric mean of consecutive window ratios.
pub fn window_ratio(increments: &[WindowIncrement]) -> Result<f64> {
    if increments.len() < 2 {
        return Err(Error::InvalidArgument("need two windows for a ratio".into()));
    }
    let (a, b) = (increments[0].value, increments[increments.len() - 1].value);
    if !(a > 0.0) {
        return Err(Error::DegenerateFit("first window increment vanishes".into()));
    }
    Ok((b / a).powf(1.0 / (increments.len() - 1) as f64))
}

/// The four pieces of `dt f_+ + i dt Theta f_+`, per component.
#[derive(Clone, Debug)]
pub struct ResidualTerms {
    pub t: f64,
    pub f_plus: [Spectrum; 2],
    /// `-e^{it<xi>} (nE)^` from the equation.
    pub dt_f_plus: [Spectrum; 2],
    pub m: [[Spectrum; 4]; 2],
    /// `dt Theta` with the dynamical normalization, on every lattice index.
    pub theta_rate: Vec<f64>,
}

impl ResidualTerms {
    pub fn sum(&self, c: usize) -> Spectrum {
        let m = &self.m[c];
        m[0].add(&m[1]).add(&m[2]).add(&m[3])
    }

    /// `dt f_+ + i dt Theta f_+`.
    pub fn lhs(&self, c: usize) -> Spectrum {
        Spectrum(
            (0..self.f_plus[c].0.len())
                .map(|i| self.dt_f_plus[c].0[i] + I * self.theta_rate[i] * self.f_plus[c].0[i])
                .collect(),
        )
    }

    /// Sizes `||M_i||` summed in quadrature over components.
    pub fn magnitudes(&self, grid: &Grid) -> [f64; 4] {
        std::array::from_fn(|k| (grid.l2_spectral(&self.m[0][k]).powi(2) + grid.l2_spectral(&self.m[1][k]).powi(2)).sqrt())
    }
}

fn complex_field(grid: &Grid, s: &Spectrum) -> Vec<C64> {
    grid.inverse_complex(s)
}

fn dealiased_product(grid: &Grid, real: &Field, z: &[C64]) -> Spectrum {
    let prod: Vec<C64> = real.0.iter().zip(z).map(|(a, b)| b * a).collect();
    grid.dealias(&grid.forward_complex(&prod))
}

/// Residual terms at one snapshot. `m` is the companion field, `wave` the
/// lattice low-frequency wave of the same free data.
pub fn residual_terms(
    grid: &Grid,
    s: &SpectralState,
    m: &Companion,
    data: &FreeWaveData,
    wave: &LatticeLowWave,
) -> Result<ResidualTerms> {
    let t = s.t;
    let (l, _) = free_wave_evolve(grid, data, t)?;
    let (l_low, l_high) = lp::lowfreq_split(grid, &l, t, wave.p)?;
    let (l, l_low, l_high) = (grid.inverse(&l), grid.inverse(&l_low), grid.inverse(&l_high));
    let lap_m = grid.inverse(&grid.laplacian(&m.m));
    let n = grid.inverse(&s.n);
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid.in_band(i, grid.dealias_fraction())).collect();
    let xis: Vec<[f64; 2]> = idx.iter().map(|&i| grid.xi(i)).collect();
    let ray = wave.eval(t, &ray_points(t, &xis));
    let mut ray_full = vec![0.0; grid.len()];
    let mut theta = vec![0.0; grid.len()];
    for (k, &i) in idx.iter().enumerate() {
        ray_full[i] = ray[k];
        theta[i] = PhaseNormalization::Dynamical.factor() / bracket(norm2(xis[k])) * ray[k];
    }
    let f_plus = profile_f(grid, s, 1.0);
    let phase = |sp: &Spectrum| half_phase(grid, sp, 1.0, t, 1.0);
    let terms = each(|c| {
        let e = grid.inverse(&s.e[c]);
        let inv_b = |sp: &Spectrum| grid.apply_real(sp, |xi| 1.0 / bracket(norm2(xi)));
        let w_plus = complex_field(grid, &inv_b(&crate::diagnostics::half_wave_part(grid, &s.e[c], &s.et[c], 1.0)));
        let w_minus = complex_field(grid, &inv_b(&crate::diagnostics::half_wave_part(grid, &s.e[c], &s.et[c], -1.0)));
        let dt_f = phase(&grid.product(&n, &e)).scale(C64::new(-1.0, 0.0));
        let m1 = phase(&dealiased_product(grid, &l, &w_minus)).scale(0.5 * I);
        let m2 = phase(&dealiased_product(grid, &l_high, &w_plus)).scale(-0.5 * I);
        let diag = Spectrum(
            (0..grid.len()).map(|i| ray_full[i] * f_plus[c].0[i] / bracket(norm2(grid.xi(i)))).collect(),
        );
        let m3 = phase(&dealiased_product(grid, &l_low, &w_plus)).sub(&diag).scale(-0.5 * I);
        let m4 = phase(&grid.product(&lap_m, &e)).scale(C64::new(-1.0, 0.0));
        (dt_f, [m1, m2, m3, m4])
    });
    let [(d0, m0), (d1, m1)] = terms;
    Ok(ResidualTerms { t, f_plus, dt_f_plus: [d0, d1], m: [m0, m1], theta_rate: theta })
}

/// `||dt f_+ + i dt Theta f_+ - sum M|| / ||sum M||` over both components.
pub fn identity_check(grid: &Grid, r: &ResidualTerms) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..2 {
        let sum = r.sum(c);
        num += grid.l2_spectral(&r.lhs(c).sub(&sum)).powi(2);
        den += grid.l2_spectral(&sum).powi(2);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Outcome of the integrated form of the residual identity on one window.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedIdentity {
    pub steps: Vec<f64>,
    /// `||f_*(b) - f_*(a) - int e^{i Theta} sum M|| / ||f_*(b) - f_*(a)||` per step.
    pub errors: Vec<f64>,
    /// `||D(h) - D(h/2)|| / ||D(h/2) - D(h/4)||` for consecutive triples.
    pub ratios: Vec<f64>,
}

/// Re-integrates `[a, a + width]` from a snapshot with a fine step and checks
/// `f_*(b) - f_*(a) = int_a^b e^{i Theta} (M1 + M2 + M3 + M4) ds` on the
/// lattice frequencies with `|xi| <= radius`. For each `ds` in `steps`,
/// Theta is composite Simpson from `t0` with step `ds` and the time
/// integral is composite Simpson on the even nodes, step `2 ds`.
#[allow(clippy::too_many_arguments)]
pub fn integrated_identity(
    grid: &Grid,
    start: &SpectralState,
    companion: &Companion,
    data: &FreeWaveData,
    wave: &LatticeLowWave,
    width: f64,
    fine_dt: f64,
    steps: &[f64],
    radius: f64,
) -> Result<IntegratedIdentity> {
    let a = start.t;
    let coarsest = steps.iter().cloned().fold(0.0, f64::max);
    let finest = steps.iter().cloned().fold(f64::INFINITY, f64::min);
    let aligned = |x: f64, q: f64| ((x / q) - (x / q).round()).abs() < 1e-9;
    if steps.len() < 3 || !aligned(a - data.t0, 2.0 * coarsest) || !aligned(width, 4.0 * coarsest) || !aligned(2.0 * finest, fine_dt) {
        return Err(Error::InvalidArgument("integrated identity needs aligned window, steps and fine step".into()));
    }
    let idx = lattice_subset(grid, radius);
    let xis: Vec<[f64; 2]> = idx.iter().map(|&i| grid.xi(i)).collect();
    // residual sums at the finest time nodes
    let node_dt = 2.0 * finest;
    let nodes = (width / node_dt).round() as usize;
    let per_node = (node_dt / fine_dt).round() as usize;
    let mut stepper = crate::evolution::Stepper::new(grid, fine_dt)?;
    let (mut s, mut m) = (start.clone(), companion.clone());
    let mut sums: Vec<[Vec<C64>; 2]> = Vec::with_capacity(nodes + 1);
    let mut ends = Vec::new();
    for k in 0..=nodes {
        let r = residual_terms(grid, &s, &m, data, wave)?;
        sums.push(each(|c| {
            let total = r.sum(c);
            idx.iter().map(|&i| total.0[i]).collect()
        }));
        if k == 0 || k == nodes {
            ends.push(each(|c| idx.iter().map(|&i| r.f_plus[c].0[i]).collect::<Vec<_>>()));
        }
        if k < nodes {
            for _ in 0..per_node {
                stepper.step_with_companion(&mut s, &mut m);
            }
            s.t = a + (k + 1) as f64 * node_dt;
        }
    }
    let mut diffs = Vec::new();
    let mut errors = Vec::new();
    for &ds in steps {
        let stride = (2.0 * ds / node_dt).round() as usize;
        // Theta at the even nodes via a schedule of spacing 2 ds from t0
        let count = ((a + width - data.t0) / (2.0 * ds)).round() as usize;
        let schedule: Vec<f64> = (0..=count).map(|j| data.t0 + j as f64 * 2.0 * ds).collect();
        let table = PhaseTable::build(wave, &schedule, xis.clone(), PhaseNormalization::Dynamical, ds)?;
        let offset = ((a - data.t0) / (2.0 * ds)).round() as usize;
        let panels = nodes / stride;
        let h = 2.0 * ds;
        let mut d: Vec<C64> = Vec::with_capacity(2 * idx.len());
        let mut lhs_norm = 0.0;
        for c in 0..2 {
            for j in 0..idx.len() {
                let mut integral = C64::new(0.0, 0.0);
                for q in 0..=panels {
                    let w = if q == 0 || q == panels { 1.0 } else if q % 2 == 1 { 4.0 } else { 2.0 };
                    let theta = table.values[offset + q][j];
                    integral += sums[q * stride][c][j] * C64::from_polar(w * h / 3.0, theta);
                }
                let fa = ends[0][c][j] * C64::from_polar(1.0, table.values[offset][j]);
                let fb = ends[1][c][j] * C64::from_polar(1.0, table.values[offset + panels][j]);
                lhs_norm += (fb - fa).norm_sqr();
                d.push(fb - fa - integral);
            }
        }
        errors.push(norm2_c(&d) / lhs_norm.sqrt().max(f64::MIN_POSITIVE));
        diffs.push(d);
    }
    let ratios = diffs
        .windows(3)
        .map(|w| {
            let a: Vec<C64> = w[0].iter().zip(&w[1]).map(|(x, y)| x - y).collect();
            let b: Vec<C64> = w[1].iter().zip(&w[2]).map(|(x, y)| x - y).collect();
            norm2_c(&a) / norm2_c(&b)
        })
        .collect();
    Ok(IntegratedIdentity { steps: steps.to_vec(), errors, ratios })
}

fn norm2_c(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Slope of `Theta` against `log t` per tabulated frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGrowth {
    pub xi: [f64; 2],
    pub slope: f64,
    /// `slope / (pi n1_hat(0))`.
    pub ratio: f64,
}

/// Log-linear fit of the printed-normalization phase over `t >= fit_from`.
pub fn theta_growth(table: &PhaseTable, moment: f64, fit_from: f64) -> Result<Vec<ThetaGrowth>> {
    if moment == 0.0 {
        return Err(Error::InvalidArgument("theta growth is measured for nonzero moment".into()));
    }
    let scale = table.normalization.factor() / PhaseNormalization::Printed.factor();
    let rows: Vec<usize> = (0..table.times.len()).filter(|&i| table.times[i] >= fit_from).collect();
    let t: Vec<f64> = rows.iter().map(|&i| table.times[i]).collect();
    (0..table.xis.len())
        .map(|j| {
            let y: Vec<f64> = rows.iter().map(|&i| table.values[i][j] / scale).collect();
            let fit = fit_rate(&t, &y, FitModel::LogLinear)?;
            Ok(ThetaGrowth { xi: table.xis[j], slope: fit.coeffs[1], ratio: fit.coeffs[1] / (PI * moment) })
        })
        .collect()
}

/// `||(dt n, grad n)||`. The zero mode stays in: before the waves wrap
/// around, the torus mean is the integral of the planar tail over the box.
pub fn density_gradient_norm(grid: &Grid, s: &SpectralState) -> f64 {
    let a = grid.l2_spectral(&s.nt);
    let b = grid.l2_spectral_weighted(&s.n, norm2);
    (a * a + b * b).sqrt()
}

/// `(2 pi)^{-2} int_{|xi| <= 1} sin^2((t - t0)|xi|) / |xi|^2 dxi` times `mu^2`.
pub fn cascade_oracle_norm(t: f64, t0: f64, moment: f64) -> f64 {
    let tau = t - t0;
    let panels = (64.0 * (1.0 + tau)).ceil() as usize;
    let f = |rho: f64| if rho == 0.0 { 0.0 } else { (tau * rho).sin().powi(2) / rho };
    moment * moment / (2.0 * PI) * simpson(f, 0.0, 1.0, panels)
}

/// Result of the cascade experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeReport {
    pub times: Vec<f64>,
    pub norm_n: Vec<f64>,
    pub norm_dn: Vec<f64>,
    /// Fitted `b` in `||n||^2 = a + b log t`.
    pub fit_b: f64,
    pub oracle_b: f64,
    pub ratio: f64,
    pub sup_dn: f64,
    pub dn_at_4: f64,
}

/// Fits `||n||^2 = a + b log t` on `[fit_from, fit_to]` and the oracle slope
/// on the same sample times.
pub fn fit_norm_growth(times: &[f64], norm_n: &[f64], fit_from: f64, fit_to: f64, t0: f64, moment: f64) -> Result<(f64, f64)> {
    let rows: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= fit_from && times[i] <= fit_to).collect();
    let t: Vec<f64> = rows.iter().map(|&i| times[i]).collect();
    let y: Vec<f64> = rows.iter().map(|&i| norm_n[i].powi(2)).collect();
    let b = fit_rate(&t, &y, FitModel::LogLinear)?.coeffs[1];
    let oracle: Vec<f64> = t.iter().map(|&s| cascade_oracle_norm(s, t0, moment)).collect();
    let b_star = fit_rate(&t, &oracle, FitModel::LogLinear)?.coeffs[1];
    Ok((b, b_star))
}

/// Runs the full system from the given data and fits the cascade rate.
pub fn cascade_experiment(
    grid: &Grid,
    params: &InitialDataParams,
    schedule: &Schedule,
    fit_from: f64,
    fit_to: f64,
) -> Result<CascadeReport> {
    if params.n1_shape != N1Shape::Gaussian || params.moment == 0.0 {
        return Err(Error::InvalidArgument("cascade needs a nonzero density moment; use the dichotomy run".into()));
    }
    let initial = make_initial_data(grid, params)?;
    crate::evolution::check_box(grid, params.radius(), params.t0, schedule.t_end)?;
    let (mut times, mut norm_n, mut norm_dn) = (Vec::new(), Vec::new(), Vec::new());
    evolve_with(grid, initial, schedule, |snap| {
        times.push(snap.state.t);
        norm_n.push(grid.l2_spectral(&snap.state.n));
        norm_dn.push(density_gradient_norm(grid, &snap.state));
        Ok(())
    })?;
    let (fit_b, oracle_b) = fit_norm_growth(&times, &norm_n, fit_from, fit_to, params.t0, params.moment)?;
    let at4 = times
        .iter()
        .position(|&t| (t - 4.0).abs() < 1e-9)
        .ok_or_else(|| Error::InvalidArgument("the schedule has no snapshot at t = 4".into()))?;
    Ok(CascadeReport {
        sup_dn: norm_dn.iter().cloned().fold(0.0, f64::max),
        dn_at_4: norm_dn[at4],
        ratio: fit_b / oracle_b,
        times,
        norm_n,
        norm_dn,
        fit_b,
        oracle_b,
    })
}
