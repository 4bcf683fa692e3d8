//! Null forms, the normal-form transform `n~ = n + Laplace|E|^2 / 4` of the
//! density, the algebraic identity behind it and the dyadic-window
//! integrability test used to decide linear scattering.
//!
//! Index conventions: metric `diag(-1, 1, 1)`, coordinates `(t, x1, x2)`,
//! `d^0 = -d_0`, `d^a = d_a`, `Box = -d_t^2 + Laplace`.

use crate::evolution::SpectralState;
use crate::jet::Jet;
use crate::spectral::{Field, Grid, Spectrum};
use crate::{Error, Result, C64};
use rand::{Rng, SeedableRng};

/// `eta^{alpha alpha}`.
fn metric(alpha: usize) -> f64 {
    if alpha == 0 {
        -1.0
    } else {
        1.0
    }
}

/// One term `A Re exp(-sum_i w_i (X_i - c_i)^2 + i (k . X + phase))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavepacket {
    pub amplitude: f64,
    pub center: [f64; 3],
    pub widths: [f64; 3],
    pub wave: [f64; 3],
    pub phase: f64,
}

/// Closed-form spacetime field with exact derivatives up to order four.
#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedField {
    pub terms: Vec<Wavepacket>,
}

impl ManufacturedField {
    pub fn constant(v: f64) -> Self {
        ManufacturedField {
            terms: vec![Wavepacket { amplitude: v, center: [0.0; 3], widths: [0.0; 3], wave: [0.0; 3], phase: 0.0 }],
        }
    }

    /// Jet of the field at `p = (t, x1, x2)`.
    pub fn jet(&self, p: [f64; 3]) -> Jet {
        let mut out = Jet::zero();
        for w in &self.terms {
            let mut arg = Jet::constant(C64::new(0.0, w.phase));
            for i in 0..3 {
                let y = Jet::variable(i, p[i] - w.center[i]);
                arg = arg - (y * y).scale(C64::new(w.widths[i], 0.0));
                arg = arg + Jet::variable(i, p[i]).scale(C64::new(0.0, w.wave[i]));
            }
            out = out + arg.exp().scale(C64::new(w.amplitude, 0.0));
        }
        out.re()
    }

    /// Value and first derivatives in closed form, independent of jets.
    pub fn gradient(&self, p: [f64; 3]) -> (f64, [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for w in &self.terms {
            let mut arg = C64::new(0.0, w.phase);
            let mut darg = [C64::new(0.0, 0.0); 3];
            for i in 0..3 {
                let y = p[i] - w.center[i];
                arg += C64::new(-w.widths[i] * y * y, w.wave[i] * p[i]);
                darg[i] = C64::new(-2.0 * w.widths[i] * y, w.wave[i]);
            }
            let e = arg.exp() * w.amplitude;
            v += e.re;
            for i in 0..3 {
                g[i] += (darg[i] * e).re;
            }
        }
        (v, g)
    }

    /// Random field with `1..=max_terms` packets centred in the unit window.
    /// With `oscillating = false` every wave vector vanishes.
    pub fn random(rng: &mut impl Rng, max_terms: usize, oscillating: bool) -> Self {
        let count = rng.gen_range(1..=max_terms);
        let terms = (0..count)
            .map(|_| Wavepacket {
                amplitude: rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                center: [rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                widths: [rng.gen_range(0.2..1.0), rng.gen_range(0.3..1.5), rng.gen_range(0.3..1.5)],
                wave: if oscillating {
                    [rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]
                } else {
                    [0.0; 3]
                },
                phase: if oscillating { rng.gen_range(0.0..std::f64::consts::TAU) } else { 0.0 },
            })
            .collect();
        ManufacturedField { terms }
    }

    /// Seeded corpus of fields.
    pub fn corpus(count: usize, max_terms: usize, seed: u64, oscillating: bool) -> Vec<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| Self::random(&mut rng, max_terms, oscillating)).collect()
    }
}

fn unit(axes: &[usize]) -> [usize; 3] {
    let mut e = [0; 3];
    for &a in axes {
        e[a] += 1;
    }
    e
}

fn d(j: &Jet, axes: &[usize]) -> f64 {
    j.derivative(unit(axes)).re
}

/// `Box d^X u` at the base point.
fn boxed(j: &Jet, axes: &[usize]) -> f64 {
    let with = |a: usize| {
        let mut v = axes.to_vec();
        v.extend([a, a]);
        d(j, &v)
    };
    -with(0) + with(1) + with(2)
}

/// `Q_{alpha beta}(f, g) = d_alpha f d_beta g - d_beta f d_alpha g` from gradients.
pub fn null_form(df: [f64; 3], dg: [f64; 3], alpha: usize, beta: usize) -> f64 {
    df[alpha] * dg[beta] - df[beta] * dg[alpha]
}

/// Grid version of the null form from the three partial derivatives of each field.
pub fn null_form_fields(df: [&Field; 3], dg: [&Field; 3], alpha: usize, beta: usize) -> Field {
    Field(
        (0..df[0].0.len())
            .map(|i| df[alpha].0[i] * dg[beta].0[i] - df[beta].0[i] * dg[alpha].0[i])
            .collect(),
    )
}

/// Both sides of the transform identity at one point: `d_g(fg) - Box d_g(fg)/4`
/// and the null-form expansion, where `g` is the index `gamma`.
pub fn transform_identity_sides(f: &Jet, g: &Jet, gamma: usize) -> (f64, f64) {
    let fg = *f * *g;
    let lhs = d(&fg, &[gamma]) - 0.25 * boxed(&fg, &[gamma]);
    let (fv, gv) = (f.value().re, g.value().re);
    let (dfg, dgg) = (d(f, &[gamma]), d(g, &[gamma]));
    let (box_f, box_g) = (boxed(f, &[]), boxed(g, &[]));
    let mut rhs = 0.25 * (-boxed(f, &[gamma]) + dfg) * gv
        + 0.75 * dfg * (-box_g + gv)
        + 0.75 * (-box_f + fv) * dgg
        + 0.25 * fv * (-boxed(g, &[gamma]) + dgg);
    // Q_{gamma alpha}(d^alpha f, g) and Q_{alpha gamma}(f, d^alpha g)
    let mut q1 = -box_f * dgg;
    let mut q2 = -dfg * box_g;
    for alpha in 0..3 {
        q1 += metric(alpha) * d(f, &[gamma, alpha]) * d(g, &[alpha]);
        q2 += metric(alpha) * d(f, &[alpha]) * d(g, &[gamma, alpha]);
    }
    rhs -= 0.5 * (q1 + q2);
    (lhs, rhs)
}

/// Sample points of the identity checks: a deterministic lattice in
/// `[0, 1] x [-2, 2]^2` with `per_axis^3` points.
pub fn sample_points(per_axis: usize) -> Vec<[f64; 3]> {
    let lin = |i: usize, a: f64, b: f64| a + (b - a) * (i as f64 + 0.5) / per_axis as f64;
    let mut pts = Vec::with_capacity(per_axis.pow(3));
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                pts.push([lin(i, 0.0, 1.0), lin(j, -2.0, 2.0), lin(k, -2.0, 2.0)]);
            }
        }
    }
    pts
}

/// Points used by default: 22^3 > 10^4.
pub const IDENTITY_SAMPLES_PER_AXIS: usize = 22;

/// `||LHS - RHS|| / ||RHS||` over the sample points.
pub fn transform_identity_residual(f: &ManufacturedField, g: &ManufacturedField, gamma: usize) -> Result<f64> {
    if gamma > 2 {
        return Err(Error::InvalidArgument(format!("index {gamma} out of range")));
    }
    Ok(identity_residuals(f, g, &[gamma])?[0])
}

/// Residuals for every index `gamma = 0, 1, 2`, sharing the jets.
pub fn transform_identity_residuals(f: &ManufacturedField, g: &ManufacturedField) -> Result<[f64; 3]> {
    let r = identity_residuals(f, g, &[0, 1, 2])?;
    Ok([r[0], r[1], r[2]])
}

fn identity_residuals(f: &ManufacturedField, g: &ManufacturedField, gammas: &[usize]) -> Result<Vec<f64>> {
    let mut num = vec![0.0; gammas.len()];
    let mut den = vec![0.0; gammas.len()];
    for p in sample_points(IDENTITY_SAMPLES_PER_AXIS) {
        let (fj, gj) = (f.jet(p), g.jet(p));
        for (k, &gamma) in gammas.iter().enumerate() {
            let (l, r) = transform_identity_sides(&fj, &gj, gamma);
            num[k] += (l - r).powi(2);
            den[k] += r * r;
        }
    }
    num.iter()
        .zip(&den)
        .map(|(n, d)| {
            if d.sqrt() < 1e-14 {
                Err(Error::InvalidArgument("degenerate identity input: right side vanishes".into()))
            } else {
                Ok((n / d).sqrt())
            }
        })
        .collect()
}

/// Right side of the identity for `-Box n~` in terms of a (vector) field E,
/// evaluated from its jets at one point.
pub fn density_transform_rhs(e: &[Jet]) -> f64 {
    let lap = |j: &Jet, extra: &[usize]| {
        let mut a = extra.to_vec();
        a.extend([1, 1]);
        let mut b = extra.to_vec();
        b.extend([2, 2]);
        d(j, &a) + d(j, &b)
    };
    let box_lap = |j: &Jet| boxed(j, &[1, 1]) + boxed(j, &[2, 2]);
    let mut total = 0.0;
    for j in e {
        let ev = j.value().re;
        let box_e = boxed(j, &[]);
        let lap_e = lap(j, &[]);
        let mut s = 0.5 * (-box_lap(j) + lap_e) * ev + 1.5 * lap_e * (-box_e + ev);
        for a in 1..3 {
            let da = d(j, &[a]);
            let kg = -boxed(j, &[a]) + da;
            s += 1.5 * kg * da + 0.5 * da * kg;
        }
        // Q_{a beta}(d^beta d^a E, E)
        let mut q1 = 0.0;
        for beta in 0..3 {
            q1 += metric(beta) * lap(j, &[beta]) * d(j, &[beta]);
        }
        for a in 1..3 {
            q1 -= boxed(j, &[a]) * d(j, &[a]);
        }
        // Q_{beta a}(d^a E, d^beta E)
        let mut q2 = -lap_e * box_e;
        for a in 1..3 {
            for beta in 0..3 {
                q2 += metric(beta) * d(j, &[a, beta]).powi(2);
            }
        }
        total += s - q1 - q2;
    }
    total
}

/// `n + Laplace(|E|^2) / 4` with the square dealiased.
pub fn tilde_n(grid: &Grid, s: &SpectralState) -> Spectrum {
    let dens = s.density(grid);
    s.n.add(&grid.laplacian(&dens).scale(C64::new(0.25, 0.0)))
}

/// `-Box n~` on a trajectory state: the cubic source obtained by replacing
/// every `(-Box + 1) E` by `-n E`. Returned with the 1/2-rule truncation.
pub fn box_tilde_n_source(grid: &Grid, s: &SpectralState) -> Spectrum {
    let n = grid.inverse(&s.n);
    let inv = |sp: &Spectrum| grid.inverse(sp);
    let mut total = Field::zeros(grid.len());
    for c in 0..2 {
        let (e_hat, et_hat) = (&s.e[c], &s.et[c]);
        let e = inv(e_hat);
        let et = inv(et_hat);
        let de: Vec<Spectrum> = (0..2).map(|a| grid.derivative(e_hat, a)).collect();
        let de_phys: Vec<Field> = de.iter().map(inv).collect();
        let lap_hat = grid.laplacian(e_hat);
        let lap = inv(&lap_hat);
        let dlap: Vec<Field> = (0..2).map(|a| inv(&grid.derivative(&lap_hat, a))).collect();
        let det: Vec<Field> = (0..2).map(|a| inv(&grid.derivative(et_hat, a))).collect();
        let lap_et = inv(&grid.laplacian(et_hat));
        let p_hat = grid.product(&n, &e);
        let p = inv(&p_hat);
        let dp: Vec<Field> = (0..2).map(|a| inv(&grid.derivative(&p_hat, a))).collect();
        let lap_p = inv(&grid.laplacian(&p_hat));
        let box_e = e.add(&p);
        let dbox_e: Vec<Field> = (0..2).map(|a| de_phys[a].add(&dp[a])).collect();
        let mut acc = lap_p.mul(&e).scale(-0.5);
        acc.axpy(-1.5, &lap.mul(&p));
        for a in 0..2 {
            acc.axpy(-2.0, &dp[a].mul(&de_phys[a]));
        }
        // Q_{a beta}(d^beta d^a E, E)
        let mut q1 = lap_et.mul(&et).scale(-1.0);
        for a in 0..2 {
            q1.axpy(1.0, &dlap[a].mul(&de_phys[a]));
            q1.axpy(-1.0, &dbox_e[a].mul(&de_phys[a]));
        }
        // Q_{beta a}(d^a E, d^beta E)
        let mut q2 = lap.mul(&box_e).scale(-1.0);
        for a in 0..2 {
            q2.axpy(-1.0, &det[a].mul(&det[a]));
            for b in 0..2 {
                let dab = inv(&grid.derivative(&de[a], b));
                q2.axpy(1.0, &dab.mul(&dab));
            }
        }
        acc.axpy(-1.0, &q1);
        acc.axpy(-1.0, &q2);
        total.axpy(1.0, &acc);
    }
    grid.dealias_with(&grid.forward(&total), 0.5)
}

/// Trapezoid sum of a series over the window `[2^m, 2^{m+1}]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSum {
    pub m: i32,
    pub sum: f64,
}

/// Partial integrals over every dyadic window covered by uniformly spaced samples.
pub fn scattering_criterion(times: &[f64], values: &[f64]) -> Result<Vec<WindowSum>> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::InvalidArgument("need at least three samples".into()));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidArgument("samples must be uniformly spaced".into()));
    }
    let t0 = times[0];
    let last = *times.last().expect("nonempty");
    let index_of = |t: f64| -> Option<usize> {
        let x = (t - t0) / h;
        ((x - x.round()).abs() < 1e-6 && x.round() >= 0.0).then(|| x.round() as usize)
    };
    let mut out = Vec::new();
    let mut m = (t0.max(1e-300)).log2().ceil() as i32;
    while (m as f64 + 1.0).exp2() <= last + 1e-9 * h {
        let (a, b) = ((m as f64).exp2(), (m as f64 + 1.0).exp2());
        let (ia, ib) = match (index_of(a), index_of(b)) {
            (Some(ia), Some(ib)) => (ia, ib),
            _ => return Err(Error::InvalidArgument(format!("window [{a}, {b}] is not aligned with the samples"))),
        };
        let sum = (ia..ib).map(|i| 0.5 * h * (values[i] + values[i + 1])).sum();
        out.push(WindowSum { m, sum });
        m += 1;
    }
    Ok(out)
}
