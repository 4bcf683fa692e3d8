//! Periodic box [-L, L)^2 with N^2 points and its continuum-normalised
//! Fourier transform.
//!
//! The discrete transform approximates `u_hat(xi) = int u(x) e^{-i x.xi} dx`
//! at the lattice frequencies `xi_j = pi j / L`, so Parseval reads
//! `||u||_2 = (2 pi)^{-1} ||u_hat||_2` with Riemann sums on both sides.
//! Arrays are row-major with the first index along x1; spectra are stored
//! in the usual FFT order.

use crate::{Error, Result, C64};
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Real field sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field(pub Vec<f64>);

/// Spectrum on the frequency lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum(pub Vec<C64>);

impl Field {
    pub fn zeros(len: usize) -> Self {
        Field(vec![0.0; len])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul(&self, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn add(&self, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> Field {
        Field(self.0.iter().map(|a| a * c).collect())
    }

    pub fn axpy(&mut self, c: f64, other: &Field) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }
}

impl Spectrum {
    pub fn zeros(len: usize) -> Self {
        Spectrum(vec![C64::new(0.0, 0.0); len])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn add(&self, other: &Spectrum) -> Spectrum {
        Spectrum(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Spectrum) -> Spectrum {
        Spectrum(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: C64) -> Spectrum {
        Spectrum(self.0.iter().map(|a| a * c).collect())
    }

    pub fn axpy(&mut self, c: C64, other: &Spectrum) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }
}

/// Fourier multipliers built from the elementary symbols.
#[derive(Clone, Debug, PartialEq)]
pub enum Symbol {
    /// |xi|
    Abs,
    /// <xi> = (1 + |xi|^2)^{1/2}
    Bracket,
    /// <xi>^{-1}
    InvBracket,
    /// |xi|^{-1}; unbounded at the zero mode and rejected there.
    InvAbs,
    /// |xi|^2
    AbsSquared,
    /// i xi_axis
    Derivative(usize),
    Constant(C64),
    Product(Vec<Symbol>),
    Sum(Vec<Symbol>),
    Power(Box<Symbol>, u32),
}

impl Symbol {
    pub fn eval(&self, xi: [f64; 2]) -> C64 {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        match self {
            Symbol::Abs => C64::new(r2.sqrt(), 0.0),
            Symbol::Bracket => C64::new((1.0 + r2).sqrt(), 0.0),
            Symbol::InvBracket => C64::new(1.0 / (1.0 + r2).sqrt(), 0.0),
            Symbol::InvAbs => C64::new(1.0 / r2.sqrt(), 0.0),
            Symbol::AbsSquared => C64::new(r2, 0.0),
            Symbol::Derivative(a) => C64::new(0.0, xi[*a]),
            Symbol::Constant(c) => *c,
            Symbol::Product(fs) => fs.iter().fold(C64::new(1.0, 0.0), |acc, f| acc * f.eval(xi)),
            Symbol::Sum(fs) => fs.iter().fold(C64::new(0.0, 0.0), |acc, f| acc + f.eval(xi)),
            Symbol::Power(f, k) => f.eval(xi).powu(*k),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Grid geometry plus cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    half_width: f64,
    dealias_fraction: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    freqs: Vec<f64>,
    signs: Vec<f64>,
    /// `in_band` at the grid's own dealias fraction.
    keep: Vec<bool>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("dealias_fraction", &self.dealias_fraction)
            .finish()
    }
}

impl Grid {
    pub fn new(n: usize, half_width: f64, dealias_fraction: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("N = {n} must be even and at least 8")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction {dealias_fraction} must lie in (0, 1]"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let freqs = (0..n).map(|i| PI * signed_index(i, n) as f64 / half_width).collect();
        let signs = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut grid = Grid { n, half_width, dealias_fraction, fwd, inv, freqs, signs, keep: Vec::new() };
        grid.keep = (0..n * n).map(|i| grid.in_band(i, dealias_fraction)).collect();
        Ok(grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Physical coordinate of 1D index `m`.
    pub fn coord(&self, m: usize) -> f64 {
        -self.half_width + m as f64 * self.dx()
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        [self.coord(idx / self.n), self.coord(idx % self.n)]
    }

    /// Lattice frequency of 1D index `i` (FFT order).
    pub fn freq(&self, i: usize) -> f64 {
        self.freqs[i]
    }

    pub fn xi(&self, idx: usize) -> [f64; 2] {
        [self.freqs[idx / self.n], self.freqs[idx % self.n]]
    }

    pub fn signed(&self, i: usize) -> i64 {
        signed_index(i, self.n)
    }

    /// True on the row or column holding the Nyquist mode.
    pub fn on_nyquist(&self, idx: usize) -> bool {
        let h = self.n / 2;
        idx / self.n == h || idx % self.n == h
    }

    /// Zero mode is stored at index 0.
    pub const ZERO_MODE: usize = 0;

    pub fn field_from_fn(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field((0..self.len()).map(|i| f(self.point(i))).collect())
    }

    pub fn spectrum_from_fn(&self, f: impl Fn([f64; 2]) -> C64) -> Spectrum {
        Spectrum((0..self.len()).map(|i| f(self.xi(i))).collect())
    }

    fn fft2(&self, buf: &mut [C64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.n);
    }

    fn phase(&self, idx: usize) -> f64 {
        self.signs[idx / self.n] * self.signs[idx % self.n]
    }

    pub fn forward(&self, u: &Field) -> Spectrum {
        let mut buf: Vec<C64> = u.0.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        Spectrum(buf)
    }

    pub fn forward_complex(&self, u: &[C64]) -> Spectrum {
        let mut buf = u.to_vec();
        self.forward_in_place(&mut buf);
        Spectrum(buf)
    }

    fn forward_in_place(&self, buf: &mut [C64]) {
        self.fft2(buf, false);
        let w = self.dx() * self.dx();
        for (idx, v) in buf.iter_mut().enumerate() {
            *v *= w * self.phase(idx);
        }
    }

    /// Complex inverse transform.
    pub fn inverse_complex(&self, s: &Spectrum) -> Vec<C64> {
        let w = 1.0 / (self.dx() * self.dx() * self.len() as f64);
        let mut buf: Vec<C64> =
            s.0.iter().enumerate().map(|(idx, v)| v * (w * self.phase(idx))).collect();
        self.fft2(&mut buf, true);
        buf
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self, s: &Spectrum) -> Field {
        Field(self.inverse_complex(s).into_iter().map(|v| v.re).collect())
    }

    /// Inverse transforms of two spectra of real fields with one complex
    /// transform of `a + i b`.
    pub fn inverse_pair(&self, a: &Spectrum, b: &Spectrum) -> [Field; 2] {
        let z: Vec<C64> = a.0.iter().zip(&b.0).map(|(x, y)| x + C64::i() * y).collect();
        let out = self.inverse_complex(&Spectrum(z));
        [Field(out.iter().map(|v| v.re).collect()), Field(out.iter().map(|v| v.im).collect())]
    }

    /// Forward transforms of two real fields, split from the transform of
    /// `u + i v` by Hermitian symmetry.
    pub fn forward_pair(&self, u: &Field, v: &Field) -> [Spectrum; 2] {
        let mut z: Vec<C64> = u.0.iter().zip(&v.0).map(|(&x, &y)| C64::new(x, y)).collect();
        self.forward_in_place(&mut z);
        let n = self.n;
        let mut a = Vec::with_capacity(z.len());
        let mut b = Vec::with_capacity(z.len());
        for r in 0..n {
            for c in 0..n {
                let zk = z[r * n + c];
                let zm = z[((n - r) % n) * n + (n - c) % n].conj();
                a.push(0.5 * (zk + zm));
                b.push(C64::new(0.0, -0.5) * (zk - zm));
            }
        }
        [Spectrum(a), Spectrum(b)]
    }

    /// Riemann-sum L^2 norm in physical space.
    pub fn l2(&self, u: &Field) -> f64 {
        (u.0.iter().map(|v| v * v).sum::<f64>()).sqrt() * self.dx()
    }

    pub fn l2_complex(&self, u: &[C64]) -> f64 {
        (u.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt() * self.dx()
    }

    /// L^2 norm computed on the frequency side, `(2 pi)^{-1} ||u_hat||`.
    pub fn l2_spectral(&self, s: &Spectrum) -> f64 {
        (s.0.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt() * self.dxi() / (2.0 * PI)
    }

    /// Weighted spectral L^2 norm `(2 pi)^{-1} ||w(xi) u_hat||`.
    pub fn l2_spectral_weighted(&self, s: &Spectrum, w: impl Fn([f64; 2]) -> f64) -> f64 {
        let sum: f64 = s.0.iter().enumerate().map(|(i, v)| w(self.xi(i)).powi(2) * v.norm_sqr()).sum();
        sum.sqrt() * self.dxi() / (2.0 * PI)
    }

    /// Pointwise multiplier `m(xi) u_hat(xi)`.
    pub fn apply(&self, s: &Spectrum, m: impl Fn([f64; 2]) -> C64) -> Spectrum {
        Spectrum(s.0.iter().enumerate().map(|(i, v)| v * m(self.xi(i))).collect())
    }

    pub fn apply_real(&self, s: &Spectrum, m: impl Fn([f64; 2]) -> f64) -> Spectrum {
        Spectrum(s.0.iter().enumerate().map(|(i, v)| v * m(self.xi(i))).collect())
    }

    /// Applies a symbol; the Nyquist row and column are set to zero so that
    /// odd symbols keep real fields real.
    pub fn multiplier(&self, s: &Spectrum, symbol: &Symbol) -> Result<Spectrum> {
        let mut out = Vec::with_capacity(s.0.len());
        for (i, v) in s.0.iter().enumerate() {
            if self.on_nyquist(i) {
                out.push(C64::new(0.0, 0.0));
                continue;
            }
            let m = symbol.eval(self.xi(i));
            if !(m.re.is_finite() && m.im.is_finite()) {
                return Err(Error::UnboundedSymbol(format!(
                    "{symbol} is not finite at xi = {:?}",
                    self.xi(i)
                )));
            }
            out.push(v * m);
        }
        Ok(Spectrum(out))
    }

    /// Spectral derivative along `axis` (0 for x1, 1 for x2).
    pub fn derivative(&self, s: &Spectrum, axis: usize) -> Spectrum {
        let h = self.n / 2;
        Spectrum(
            s.0.iter()
                .enumerate()
                .map(|(i, v)| {
                    let (r, c) = (i / self.n, i % self.n);
                    if r == h || c == h {
                        C64::new(0.0, 0.0)
                    } else {
                        v * C64::new(0.0, self.freqs[if axis == 0 { r } else { c }])
                    }
                })
                .collect(),
        )
    }

    pub fn laplacian(&self, s: &Spectrum) -> Spectrum {
        self.apply_real(s, |xi| -(xi[0] * xi[0] + xi[1] * xi[1]))
    }

    /// True if the mode survives truncation at `fraction` of the Nyquist index.
    pub fn in_band(&self, idx: usize, fraction: f64) -> bool {
        if fraction >= 1.0 {
            return true;
        }
        let cut = fraction * (self.n / 2) as f64;
        let (a, b) = (self.signed(idx / self.n).abs(), self.signed(idx % self.n).abs());
        (a as f64) < cut && (b as f64) < cut
    }

    /// Zeroes every mode with `|j_a| >= fraction * N / 2` in either direction.
    /// Fraction 1 is the identity.
    pub fn dealias_with(&self, s: &Spectrum, fraction: f64) -> Spectrum {
        if fraction >= 1.0 {
            return s.clone();
        }
        Spectrum(
            s.0.iter()
                .enumerate()
                .map(|(i, v)| if self.in_band(i, fraction) { *v } else { C64::new(0.0, 0.0) })
                .collect(),
        )
    }

    pub fn dealias(&self, s: &Spectrum) -> Spectrum {
        Spectrum(s.0.iter().zip(&self.keep).map(|(v, &k)| if k { *v } else { C64::new(0.0, 0.0) }).collect())
    }

    /// Alias-free spectrum of the product of two fields.
    pub fn product(&self, u: &Field, v: &Field) -> Spectrum {
        self.dealias(&self.forward(&u.mul(v)))
    }
}

pub fn dealias(grid: &Grid, s: &Spectrum, fraction: f64) -> Result<Spectrum> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("dealias fraction {fraction}")));
    }
    Ok(grid.dealias_with(s, fraction))
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn transpose(buf: &mut [C64], n: usize) {
    // Tiled so that both sides of each swap stay in cache.
    const TILE: usize = 16;
    for r0 in (0..n).step_by(TILE) {
        for c0 in (r0..n).step_by(TILE) {
            for r in r0..(r0 + TILE).min(n) {
                for c in c0.max(r + 1)..(c0 + TILE).min(n) {
                    buf.swap(r * n + c, c * n + r);
                }
            }
        }
    }
}

/// Japanese bracket `(1 + r^2)^{1/2}`.
pub fn bracket(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

pub fn norm2(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Smooth Littlewood-Paley cutoffs.
pub mod lp {
    use super::*;

    /// Range of dyadic indices used whenever a partition of unity is summed.
    pub const K_RANGE: std::ops::RangeInclusive<i32> = -40..=40;

    fn h(s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (-1.0 / s).exp()
        }
    }

    /// Radial bump: 1 on [0, 1], 0 beyond 2, smooth and monotone between.
    pub fn psi(r: f64) -> f64 {
        let r = r.abs();
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            let a = h(2.0 - r);
            a / (a + h(r - 1.0))
        }
    }

    /// `psi(r) - psi(2 r)`, supported in [1/2, 2].
    pub fn phi(r: f64) -> f64 {
        psi(r) - psi(2.0 * r)
    }

    pub fn phi_k(k: i32, r: f64) -> f64 {
        phi(r * (-k as f64).exp2())
    }

    /// `psi(r / 2^k)`: the sum of all pieces up to and including `k`.
    pub fn phi_le(k: i32, r: f64) -> f64 {
        psi(r * (-k as f64).exp2())
    }

    /// Dyadic frequency band selector.
    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Band {
        Exact(i32),
        AtMost(i32),
    }

    impl Band {
        pub fn weight(self, r: f64) -> f64 {
            match self {
                Band::Exact(k) => phi_k(k, r),
                Band::AtMost(k) => phi_le(k, r),
            }
        }
    }

    pub fn lp_project(grid: &Grid, s: &Spectrum, band: Band) -> Spectrum {
        grid.apply_real(s, |xi| band.weight(norm2(xi)))
    }

    /// Splits `u_hat` into `psi(|eta| <t>^p) u_hat` and the remainder.
    pub fn lowfreq_split(grid: &Grid, s: &Spectrum, t: f64, p: f64) -> Result<(Spectrum, Spectrum)> {
        if t < 0.0 || !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("low/high split needs t >= 0 and p in (0,1), got t = {t}, p = {p}")));
        }
        let scale = bracket(t).powf(p);
        let low = grid.apply_real(s, |xi| psi(norm2(xi) * scale));
        let high = s.sub(&low);
        Ok((low, high))
    }
}

#[cfg(test)]
mod tests {
    use super::lp::*;
    use super::*;

    fn gaussian_grid() -> (Grid, Field) {
        let g = Grid::new(64, 8.0, 2.0 / 3.0).unwrap();
        let u = g.field_from_fn(|x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        (g, u)
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let (g, u) = gaussian_grid();
        let s = g.forward(&u);
        for (i, v) in s.0.iter().enumerate() {
            let xi = g.xi(i);
            let exact = 2.0 * PI * (-(xi[0] * xi[0] + xi[1] * xi[1]) / 2.0).exp();
            assert!((v - exact).norm() < 1e-12, "{i} {v} {exact}");
        }
    }

    #[test]
    fn paired_transforms_match_single() {
        let g = Grid::new(30, 5.0, 1.0).unwrap();
        let u = g.field_from_fn(|x| (x[0] - 0.3 * x[1]).sin() * (-x[1] * x[1] / 4.0).exp());
        let v = g.field_from_fn(|x| x[0] * (-(x[0] * x[0] + x[1] * x[1]) / 3.0).exp() + 0.1);
        let [a, b] = g.forward_pair(&u, &v);
        assert!(a.sub(&g.forward(&u)).0.iter().all(|z| z.norm() < 1e-13));
        assert!(b.sub(&g.forward(&v)).0.iter().all(|z| z.norm() < 1e-13));
        let [bu, bv] = g.inverse_pair(&a, &b);
        assert!(bu.sub(&u).max_abs() < 1e-14 && bv.sub(&v).max_abs() < 1e-14);
    }

    #[test]
    fn round_trip_and_parseval() {
        let (g, u) = gaussian_grid();
        let back = g.inverse(&g.forward(&u));
        let err = u.sub(&back).max_abs();
        assert!(err < 1e-13);
        let a = g.l2(&u);
        assert!((a - g.l2_spectral(&g.forward(&u))).abs() < 1e-13 * a);
        assert!((a * a - PI / 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_transform() {
        let g = Grid::new(32, 3.0, 1.0).unwrap();
        let (j1, j2) = (3i64, -5i64);
        let xi0 = [PI * j1 as f64 / 3.0, PI * j2 as f64 / 3.0];
        let u: Vec<C64> = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                C64::from_polar(1.0, x[0] * xi0[0] + x[1] * xi0[1])
            })
            .collect();
        let s = g.forward_complex(&u);
        let target = (j1.rem_euclid(32) as usize) * 32 + j2.rem_euclid(32) as usize;
        for (i, v) in s.0.iter().enumerate() {
            let expect = if i == target { 36.0 } else { 0.0 };
            assert!((v - expect).norm() < 1e-11, "{i} {v}");
        }
    }

    #[test]
    fn multiplier_rejects_unbounded_symbol() {
        let (g, u) = gaussian_grid();
        let s = g.forward(&u);
        assert!(g.multiplier(&s, &Symbol::InvAbs).is_err());
        let lap = g.multiplier(&s, &Symbol::Product(vec![Symbol::Constant(C64::new(-1.0, 0.0)), Symbol::AbsSquared])).unwrap();
        let d2 = g.derivative(&g.derivative(&s, 0), 0).add(&g.derivative(&g.derivative(&s, 1), 1));
        for (a, b) in lap.0.iter().zip(&d2.0) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_gaussian() {
        let (g, u) = gaussian_grid();
        let du = g.inverse(&g.derivative(&g.forward(&u), 1));
        let exact = g.field_from_fn(|x| -x[1] * (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        assert!(du.sub(&exact).max_abs() < 1e-12);
    }

    #[test]
    fn dealias_counts() {
        let g = Grid::new(256, 10.0, 2.0 / 3.0).unwrap();
        let kept: Vec<i64> = (0..256).filter(|&i| g.in_band(i, 2.0 / 3.0)).map(|i| g.signed(i)).collect();
        assert_eq!(kept.iter().copied().max(), Some(85));
        assert_eq!(kept.iter().copied().min(), Some(-85));
        let s = Spectrum(vec![C64::new(1.0, 0.0); g.len()]);
        assert_eq!(g.dealias_with(&s, 1.0), s);
        let half = g.dealias_with(&s, 0.5);
        assert_eq!(half.0.iter().filter(|v| v.re != 0.0).count(), 127 * 127);
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(psi(0.3), 1.0);
        assert_eq!(psi(1.0), 1.0);
        assert_eq!(psi(2.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = psi(1.0 + i as f64 / 1000.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        assert!((psi(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(phi(0.49), 0.0);
        assert_eq!(phi(2.01), 0.0);
    }

    #[test]
    fn partition_of_unity() {
        for i in 0..2000 {
            let r = (-30.0 + 60.0 * i as f64 / 1999.0f64).exp2();
            let sum: f64 = K_RANGE.map(|k| phi_k(k, r)).sum();
            assert!((sum - 1.0).abs() < 1e-14, "r = {r}: {sum}");
        }
    }

    #[test]
    fn lowfreq_split_is_exact() {
        let (g, u) = gaussian_grid();
        let s = g.forward(&u);
        let (lo, hi) = lowfreq_split(&g, &s, 4.0, 0.75).unwrap();
        assert_eq!(lo.add(&hi).0.iter().zip(&s.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) < 1e-15, true);
        assert!(lowfreq_split(&g, &s, 4.0, 1.5).is_err());
    }
}
