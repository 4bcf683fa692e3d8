//! Commuting vector fields, Sobolev and weighted norms, pointwise decay
//! envelopes, per-band Z-norm series and rate fits.

use crate::evolution::SpectralState;
use crate::spectral::{bracket, lp, norm2, Field, Grid, Spectrum};
use crate::{Error, Result, C64};

/// Generators `d_t, d_1, d_2`, the rotation `x1 d2 - x2 d1` and the
/// boosts `x_a d_t + t d_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorField {
    Time,
    Space(usize),
    Rotation,
    Boost(usize),
}

impl VectorField {
    pub const ALL: [VectorField; 6] = [
        VectorField::Time,
        VectorField::Space(0),
        VectorField::Space(1),
        VectorField::Rotation,
        VectorField::Boost(0),
        VectorField::Boost(1),
    ];
}

/// Applies a vector field to `u` given its spectrum and time derivative.
pub fn vectorfield_apply(grid: &Grid, t: f64, u: &Spectrum, ut: &Field, which: VectorField) -> Field {
    let d = |a: usize| grid.inverse(&grid.derivative(u, a));
    match which {
        VectorField::Time => ut.clone(),
        VectorField::Space(a) => d(a),
        VectorField::Rotation => {
            let (d1, d2) = (d(0), d(1));
            Field((0..grid.len()).map(|i| {
                let x = grid.point(i);
                x[0] * d2.0[i] - x[1] * d1.0[i]
            }).collect())
        }
        VectorField::Boost(a) => {
            let da = d(a);
            Field((0..grid.len()).map(|i| grid.point(i)[a] * ut.0[i] + t * da.0[i]).collect())
        }
    }
}

/// Field selector within a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Density,
    Electric(usize),
}

pub fn vectorfield_on_state(grid: &Grid, s: &SpectralState, c: Component, which: VectorField) -> Field {
    let (u, ut) = match c {
        Component::Density => (&s.n, &s.nt),
        Component::Electric(a) => (&s.e[a], &s.et[a]),
    };
    vectorfield_apply(grid, s.t, u, &grid.inverse(ut), which)
}

/// `||<xi>^s u_hat|| / (2 pi)`.
pub fn sobolev_norm(grid: &Grid, u: &Spectrum, order: f64) -> Result<f64> {
    if order < 0.0 {
        return Err(Error::InvalidArgument(format!("Sobolev order {order} must be nonnegative")));
    }
    Ok(grid.l2_spectral_weighted(u, |xi| bracket(norm2(xi)).powf(order)))
}

/// `||(d_t n, grad n)||_{H^s}`.
pub fn density_energy_norm(grid: &Grid, s: &SpectralState, order: f64) -> Result<f64> {
    let a = sobolev_norm(grid, &s.nt, order)?;
    let b = grid.l2_spectral_weighted(&s.n, |xi| norm2(xi) * bracket(norm2(xi)).powf(order));
    Ok((a * a + b * b).sqrt())
}

/// `||E||_{H^s}` for the two-component field.
pub fn field_norm(grid: &Grid, s: &SpectralState, order: f64) -> Result<f64> {
    let a = sobolev_norm(grid, &s.e[0], order)?;
    let b = sobolev_norm(grid, &s.e[1], order)?;
    Ok((a * a + b * b).sqrt())
}

/// Region restricting a weighted norm relative to the light cone `r = t - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    All,
    Interior,
    Exterior,
}

/// `|| <t - r>^gamma u ||` over the region.
pub fn weighted_l2(grid: &Grid, u: &Field, t: f64, gamma: f64, region: Region) -> f64 {
    let sum: f64 = (0..grid.len())
        .filter_map(|i| {
            let r = norm2(grid.point(i));
            let keep = match region {
                Region::All => true,
                Region::Interior => r <= t - 1.0,
                Region::Exterior => r > t - 1.0,
            };
            keep.then(|| (bracket(t - r).powf(gamma) * u.0[i]).powi(2))
        })
        .sum();
    sum.sqrt() * grid.dx()
}

/// Weight of a pointwise-decay envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeWeight {
    /// `<t + r>^{1/2} <t - r>^{1/2}`
    Wave,
    /// `<t + r>`
    KleinGordon,
    Unit,
}

impl EnvelopeWeight {
    pub fn eval(self, t: f64, r: f64) -> f64 {
        match self {
            EnvelopeWeight::Wave => (bracket(t + r) * bracket(t - r)).sqrt(),
            EnvelopeWeight::KleinGordon => bracket(t + r),
            EnvelopeWeight::Unit => 1.0,
        }
    }
}

/// `sup_x |u(x)| w(t, |x|)` where `u` is given by its pointwise magnitude.
pub fn envelope(grid: &Grid, magnitude: &Field, t: f64, weight: EnvelopeWeight) -> f64 {
    (0..grid.len())
        .map(|i| magnitude.0[i].abs() * weight.eval(t, norm2(grid.point(i))))
        .fold(0.0, f64::max)
}

/// Pointwise `|E| = (E1^2 + E2^2)^{1/2}`.
pub fn field_magnitude(grid: &Grid, s: &SpectralState) -> Field {
    let (a, b) = (grid.inverse(&s.e[0]), grid.inverse(&s.e[1]));
    Field(a.0.iter().zip(&b.0).map(|(x, y)| (x * x + y * y).sqrt()).collect())
}

/// `E_+ = (d_t - i <D>) E` or `E_- = (d_t + i <D>) E` for one component.
pub fn half_wave_part(grid: &Grid, e: &Spectrum, et: &Spectrum, sign: f64) -> Spectrum {
    Spectrum(
        (0..grid.len())
            .map(|i| et.0[i] - C64::new(0.0, sign * bracket(norm2(grid.xi(i)))) * e.0[i])
            .collect(),
    )
}

pub fn e_plus(grid: &Grid, s: &SpectralState) -> [Spectrum; 2] {
    [half_wave_part(grid, &s.e[0], &s.et[0], 1.0), half_wave_part(grid, &s.e[1], &s.et[1], 1.0)]
}

/// `||P_k u||` summed in quadrature over components.
pub fn band_norm(grid: &Grid, u: &[Spectrum], k: i32) -> f64 {
    u.iter()
        .map(|s| grid.l2_spectral_weighted(s, |xi| lp::phi_k(k, norm2(xi))).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `2^{-C_E k^-} 2^{-D_E k^+}` with `k^- = min(k, 0)`, `k^+ = max(k, 0)`.
pub fn z_weight(k: i32, c_e: f64, d_e: f64) -> f64 {
    let (km, kp) = (k.min(0) as f64, k.max(0) as f64);
    (-c_e * km - d_e * kp).exp2()
}

/// Per-time Z-norm weighted band norms of `E_+`.
pub fn zk_series(grid: &Grid, series: &[[Spectrum; 2]], k: i32, c_e: f64, d_e: f64) -> Result<Vec<f64>> {
    if !(c_e > 0.0 && d_e < 0.0) {
        return Err(Error::InvalidArgument(format!("Z-norm needs C_E > 0 > D_E, got {c_e}, {d_e}")));
    }
    let w = z_weight(k, c_e, d_e);
    Ok(series.iter().map(|e| w * band_norm(grid, e, k)).collect())
}

/// Regression model for a time series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    /// `y = c t^alpha`; coefficients `(c, alpha)`.
    PowerLaw,
    /// `y = a + b log t`; coefficients `(a, b)`.
    LogLinear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub coeffs: [f64; 2],
    /// Root-mean-square residual in the transformed variable.
    pub residual: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (icpt, slope, rms)
}

/// Least-squares fit; needs at least 8 samples spanning a factor 8 in t.
pub fn fit_rate(t: &[f64], y: &[f64], model: FitModel) -> Result<Fit> {
    if t.len() != y.len() || t.len() < 8 {
        return Err(Error::DegenerateFit(format!("{} samples, need at least 8", t.len())));
    }
    let (lo, hi) = t.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo > 0.0) || hi < 8.0 * lo {
        return Err(Error::DegenerateFit(format!("abscissae [{lo}, {hi}] span less than a factor 8")));
    }
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    match model {
        FitModel::PowerLaw => {
            if y.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::DegenerateFit("power-law fit needs positive values".into()));
            }
            let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let (a, b, r) = least_squares(&x, &ly);
            Ok(Fit { coeffs: [a.exp(), b], residual: r })
        }
        FitModel::LogLinear => {
            let (a, b, r) = least_squares(&x, y);
            Ok(Fit { coeffs: [a, b], residual: r })
        }
    }
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
