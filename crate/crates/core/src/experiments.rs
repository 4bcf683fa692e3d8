//! Named experiment suites. Each returns its measurements as plain data so
//! the acceptance tests and the command-line runner share one code path.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::diagnostics::{density_energy_norm, envelope, field_magnitude, field_norm, EnvelopeWeight};
use crate::evolution::{
    decomposition_residual, evolve_with, make_initial_data, Companion, InitialDataParams, Schedule, Snapshot,
    SpectralState, Stepper,
};
use crate::scattering::{
    cascade_experiment, cauchy_increments, identity_check, modified_profile, profile_h, residual_terms,
    theta_growth, window_ratio, ContinuumRadialWave, LatticeLowWave, PhaseNormalization, PhaseTable, ProfileSeries,
    ThetaGrowth, WindowIncrement,
};
use crate::spectral::{Field, Grid};
use crate::transform::{box_tilde_n_source, transform_identity_residuals, ManufacturedField};
use crate::{io, Error, Result};
use std::path::{Path, PathBuf};

/// Per-snapshot observables of a run with the companion field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReferenceSeries {
    pub times: Vec<f64>,
    pub sup_e: Vec<f64>,
    /// `sup |E| <t + r>`.
    pub e_envelope: Vec<f64>,
    /// `sup |n| <t + r>^{1/2} <t - r>^{1/2}`.
    pub n_envelope: Vec<f64>,
    /// `||(dt n, grad n)||_{H^4}`.
    pub n_energy: Vec<f64>,
    /// `||E||_{H^6}`.
    pub e_sobolev: Vec<f64>,
    pub decomposition: Vec<f64>,
    pub identity: Vec<f64>,
    /// `||Box n~||`.
    pub box_tilde_n: Vec<f64>,
    /// `||Laplace |E|^2||`.
    pub lap_density: Vec<f64>,
    pub h_plus: Vec<f64>,
}

impl ReferenceSeries {
    pub const HEADER: [&'static str; 11] = [
        "t",
        "sup_e",
        "e_envelope",
        "n_envelope",
        "n_energy_h4",
        "e_h6",
        "decomposition",
        "identity",
        "box_tilde_n",
        "lap_density",
        "h_plus",
    ];

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.times.len())
            .map(|i| {
                vec![
                    self.times[i],
                    self.sup_e[i],
                    self.e_envelope[i],
                    self.n_envelope[i],
                    self.n_energy[i],
                    self.e_sobolev[i],
                    self.decomposition[i],
                    self.identity[i],
                    self.box_tilde_n[i],
                    self.lap_density[i],
                    self.h_plus[i],
                ]
            })
            .collect()
    }

    fn record(&mut self, grid: &Grid, snap: &Snapshot, data: &crate::propagators::FreeWaveData, wave: &LatticeLowWave, eps: f64) -> Result<()> {
        let s = &snap.state;
        let m = snap.companion.as_ref().ok_or_else(|| Error::InvalidArgument("reference run needs the companion".into()))?;
        let t = s.t;
        let mag = field_magnitude(grid, s);
        let n_abs = Field(grid.inverse(&s.n).0.iter().map(|v| v.abs()).collect());
        self.times.push(t);
        self.sup_e.push(mag.max_abs());
        self.e_envelope.push(envelope(grid, &mag, t, EnvelopeWeight::KleinGordon));
        self.n_envelope.push(envelope(grid, &n_abs, t, EnvelopeWeight::Wave));
        self.n_energy.push(density_energy_norm(grid, s, 4.0)?);
        self.e_sobolev.push(field_norm(grid, s, 6.0)?);
        self.decomposition.push(decomposition_residual(grid, snap, data, eps)?);
        self.identity.push(identity_check(grid, &residual_terms(grid, s, m, data, wave)?));
        self.box_tilde_n.push(grid.l2_spectral(&box_tilde_n_source(grid, s)));
        self.lap_density.push(grid.l2_spectral(&grid.laplacian(&s.density(grid))));
        let h = profile_h(grid, s, 1.0);
        self.h_plus.push((grid.l2_spectral(&h[0]).powi(2) + grid.l2_spectral(&h[1]).powi(2)).sqrt());
        Ok(())
    }
}

/// Runs the system with the companion and records every observable.
/// `on_snapshot` sees each state, for example to write binary snapshots.
pub fn reference_run(
    grid: &Grid,
    params: &InitialDataParams,
    schedule: &Schedule,
    p: f64,
    mut on_snapshot: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<ReferenceSeries> {
    crate::evolution::check_box(grid, params.radius(), params.t0, schedule.t_end)?;
    let initial = make_initial_data(grid, params)?;
    let data = initial.free_wave_data();
    let wave = LatticeLowWave::new(grid, &data, p)?;
    let schedule = Schedule { companion: true, ..schedule.clone() };
    let mut out = ReferenceSeries::default();
    evolve_with(grid, initial, &schedule, |snap| {
        on_snapshot(snap)?;
        out.record(grid, snap, &data, &wave, params.epsilon)
    })?;
    Ok(out)
}

/// Self-convergence of the integrator and of the decomposition residual.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub dts: [f64; 3],
    /// `max_t ||u_h - u_{h/2}|| / max_t ||u_{h/2}||` for `h = dt, dt/2`.
    pub self_convergence: [f64; 2],
    /// `max_t` decomposition residual for each step.
    pub decomposition: [f64; 3],
}

fn state_size(grid: &Grid, s: &SpectralState) -> f64 {
    s.spectra().iter().map(|x| grid.l2_spectral(x)).fold(0.0, f64::max)
}

/// Integrates with steps `dt, dt/2, dt/4` in lockstep, comparing at every
/// `sample_every` time units.
pub fn convergence_study(grid: &Grid, params: &InitialDataParams, dt: f64, t_end: f64, sample_every: f64) -> Result<ConvergenceReport> {
    crate::evolution::check_box(grid, params.radius(), params.t0, t_end)?;
    let initial = make_initial_data(grid, params)?;
    let data = initial.free_wave_data();
    let dts = [dt, dt / 2.0, dt / 4.0];
    let mut steppers = dts.iter().map(|&h| Stepper::new(grid, h)).collect::<Result<Vec<_>>>()?;
    let mut states: Vec<Snapshot> =
        (0..3).map(|_| Snapshot { state: initial.clone(), companion: Some(Companion::zero(grid)) }).collect();
    let samples = ((t_end - params.t0) / sample_every).round() as usize;
    let per = (sample_every / dt).round() as usize;
    let (mut diff, mut size, mut resid) = ([0.0f64; 2], [0.0f64; 2], [0.0f64; 3]);
    for k in 1..=samples {
        for (j, (st, snap)) in steppers.iter_mut().zip(states.iter_mut()).enumerate() {
            let m = snap.companion.as_mut().expect("companion");
            for _ in 0..per << j {
                st.step_with_companion(&mut snap.state, m);
            }
            snap.state.t = params.t0 + k as f64 * sample_every;
            if !snap.state.is_finite() {
                return Err(Error::Diverged { t: snap.state.t });
            }
            resid[j] = resid[j].max(decomposition_residual(grid, snap, &data, params.epsilon)?);
        }
        for j in 0..2 {
            diff[j] = diff[j].max(states[j].state.distance(grid, &states[j + 1].state));
            size[j] = size[j].max(state_size(grid, &states[j + 1].state));
        }
    }
    Ok(ConvergenceReport { dts, self_convergence: [diff[0] / size[0], diff[1] / size[1]], decomposition: resid })
}

/// Plain and modified increments over dyadic windows.
#[derive(Clone, Debug, PartialEq)]
pub struct DichotomyReport {
    pub plain: Vec<WindowIncrement>,
    pub modified: Vec<WindowIncrement>,
    pub plain_ratio: f64,
    pub modified_ratio: f64,
}

/// Settings of the profile analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileAnalysis {
    pub p: f64,
    pub ds: f64,
    pub windows: Vec<i32>,
    pub bands: std::ops::RangeInclusive<i32>,
    pub c_e: f64,
    pub d_e: f64,
}

/// Runs the system, records `f_+` inside the windows and compares the plain
/// and phase-corrected increments.
pub fn dichotomy_run(grid: &Grid, params: &InitialDataParams, schedule: &Schedule, a: &ProfileAnalysis) -> Result<DichotomyReport> {
    crate::evolution::check_box(grid, params.radius(), params.t0, schedule.t_end)?;
    let first = a.windows.iter().map(|&m| (m as f64).exp2()).fold(f64::INFINITY, f64::min);
    let initial = make_initial_data(grid, params)?;
    let data = initial.free_wave_data();
    let mut series = ProfileSeries { times: vec![], profiles: vec![] };
    evolve_with(grid, initial, schedule, |snap| {
        if snap.state.t >= first - 1e-9 {
            series.push(grid, &snap.state);
        }
        Ok(())
    })?;
    let wave = LatticeLowWave::new(grid, &data, a.p)?;
    let mut times = vec![params.t0];
    times.extend(series.times.iter().cloned().filter(|&t| t > params.t0));
    let radius = (a.bands.end() + 1) as f64;
    let table = PhaseTable::for_lattice(grid, &wave, &times, radius.exp2(), PhaseNormalization::Dynamical, a.ds)?;
    let modified = modified_profile(&series, &table)?;
    let plain = cauchy_increments(grid, &series, &a.windows, a.bands.clone(), a.c_e, a.d_e)?;
    let modified = cauchy_increments(grid, &modified, &a.windows, a.bands.clone(), a.c_e, a.d_e)?;
    Ok(DichotomyReport { plain_ratio: window_ratio(&plain)?, modified_ratio: window_ratio(&modified)?, plain, modified })
}

/// Printed-normalization phase on `t0 ∪ times` from the closed-form radial data.
pub fn theta_growth_run(params: &InitialDataParams, p: f64, ds: f64, xis: &[f64], times: &[f64], fit_from: f64) -> Result<(PhaseTable, Vec<ThetaGrowth>)> {
    let wave = ContinuumRadialWave::from_params(params, p, 128)?;
    let mut schedule = vec![params.t0];
    schedule.extend(times.iter().cloned().filter(|&t| t > params.t0));
    let xis = xis.iter().map(|&x| [x, 0.0]).collect();
    let table = PhaseTable::build(&wave, &schedule, xis, PhaseNormalization::Printed, ds)?;
    let growth = theta_growth(&table, params.moment, fit_from)?;
    Ok((table, growth))
}

/// Worst transform-identity residuals over a seeded corpus of pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub pairs: usize,
    pub worst: f64,
    pub worst_gaussian: f64,
    pub residuals: Vec<(bool, usize, f64)>,
}

/// `pairs` pairs, the first third of them without oscillation; every
/// index `gamma` is checked.
pub fn identity_audit(pairs: usize, seed: u64) -> Result<IdentityReport> {
    let plain = pairs / 3;
    let mut fields = ManufacturedField::corpus(2 * plain, 3, seed, false);
    fields.extend(ManufacturedField::corpus(2 * (pairs - plain), 3, seed.wrapping_add(1), true));
    let mut residuals = Vec::new();
    for k in 0..pairs {
        let (f, g) = (&fields[2 * k], &fields[2 * k + 1]);
        for (gamma, r) in transform_identity_residuals(f, g)?.into_iter().enumerate() {
            residuals.push((k < plain, gamma, r));
        }
    }
    let worst = residuals.iter().map(|r| r.2).fold(0.0, f64::max);
    let worst_gaussian = residuals.iter().filter(|r| r.0).map(|r| r.2).fold(0.0, f64::max);
    Ok(IdentityReport { pairs, worst, worst_gaussian, residuals })
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{:010.4}.kgz", t)
}

/// Runs the configured experiment into `out`, then writes the manifest.
/// On divergence the last good state is saved as `last_good.kgz`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out)?;
    let grid = cfg.grid()?;
    let params = cfg.initial_data();
    let a = &cfg.analysis;
    let mut files = Vec::new();
    let mut csv = |name: &str, header: &[&str], rows: &[Vec<f64>]| -> Result<()> {
        let path = out.join(name);
        io::write_csv(&path, header, rows)?;
        files.push(path);
        Ok(())
    };
    let mut last_good: Option<SpectralState> = None;
    let snapshot_every = cfg.time.snapshot_every;
    let mut count = 0usize;
    let mut snapshots = Vec::new();
    let mut keep = |snap: &Snapshot| -> Result<()> {
        if snapshot_every > 0 && count % snapshot_every == 0 {
            let path = out.join(snapshot_name(snap.state.t));
            io::write_snapshot(&path, &grid, &snap.state)?;
            snapshots.push(path);
        }
        count += 1;
        last_good = Some(snap.state.clone());
        Ok(())
    };
    let result: Result<()> = match cfg.experiment {
        ExperimentKind::Smoke | ExperimentKind::Decay => {
            let params = if cfg.experiment == ExperimentKind::Smoke {
                InitialDataParams { epsilon: 0.0, moment: 0.0, n0_amplitude: 0.0, n1_amplitude: 0.0, ..params }
            } else {
                params
            };
            reference_run(&grid, &params, &cfg.schedule(true), a.p, &mut keep)
                .and_then(|series| csv("series.csv", &ReferenceSeries::HEADER, &series.rows()))
        }
        ExperimentKind::Cascade => {
            let from = a.fit_from.unwrap_or(32.0);
            let to = a.fit_to.unwrap_or(cfg.time.t_end);
            cascade_experiment(&grid, &params, &cfg.schedule(false), from, to).and_then(|r| {
                let rows: Vec<Vec<f64>> = (0..r.times.len())
                    .map(|i| vec![r.times[i], r.norm_n[i], r.norm_dn[i], r.fit_b, r.oracle_b])
                    .collect();
                csv("cascade.csv", &["t", "norm_n", "norm_dn", "fit_b", "oracle_b"], &rows)
            })
        }
        ExperimentKind::Dichotomy => {
            let analysis = ProfileAnalysis {
                p: a.p,
                ds: a.ds,
                windows: a.windows.clone(),
                bands: a.k_min..=a.k_max,
                c_e: a.c_e(),
                d_e: a.d_e(),
            };
            dichotomy_run(&grid, &params, &cfg.schedule(false), &analysis).and_then(|r| {
                let rows: Vec<Vec<f64>> =
                    r.plain.iter().zip(&r.modified).map(|(p, m)| vec![p.m as f64, p.value, m.value]).collect();
                csv("dichotomy.csv", &["m", "plain", "modified"], &rows)?;
                csv("dichotomy_ratio.csv", &["plain_ratio", "modified_ratio"], &[vec![r.plain_ratio, r.modified_ratio]])
            })
        }
        ExperimentKind::ThetaGrowth => {
            let n = ((cfg.time.t_end - cfg.time.t0) / cfg.time.sample_every).round() as usize;
            let times: Vec<f64> = (1..=n).map(|k| cfg.time.t0 + k as f64 * cfg.time.sample_every).collect();
            let from = a.fit_from.unwrap_or(cfg.time.t_end / 16.0);
            theta_growth_run(&params, a.p, a.ds, &a.xi, &times, from).and_then(|(table, growth)| {
                let mut header = vec!["t".to_string()];
                header.extend(a.xi.iter().map(|x| format!("theta_xi_{x}")));
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let rows: Vec<Vec<f64>> = table
                    .times
                    .iter()
                    .zip(&table.values)
                    .map(|(t, v)| std::iter::once(*t).chain(v.iter().cloned()).collect())
                    .collect();
                csv("theta.csv", &header, &rows)?;
                let fits: Vec<Vec<f64>> = growth.iter().map(|g| vec![g.xi[0], g.slope, g.ratio]).collect();
                csv("theta_growth.csv", &["xi", "slope", "ratio"], &fits)
            })
        }
        ExperimentKind::Identity => identity_audit(a.corpus, cfg.data.seed).and_then(|r| {
            let rows: Vec<Vec<f64>> = r
                .residuals
                .iter()
                .enumerate()
                .map(|(i, (g, gamma, v))| vec![(i / 3) as f64, *gamma as f64, if *g { 1.0 } else { 0.0 }, *v])
                .collect();
            csv("identity.csv", &["pair", "gamma", "gaussian", "residual"], &rows)
        }),
    };
    files.extend(snapshots);
    if let Err(e) = result {
        if let (Error::Diverged { .. }, Some(state)) = (&e, last_good.as_ref()) {
            io::write_snapshot(&out.join("last_good.kgz"), &grid, state)?;
            io::write_manifest(out)?;
        }
        return Err(e);
    }
    let manifest = io::write_manifest(out)?;
    files.sort();
    Ok(RunSummary { experiment: cfg.experiment, files, manifest })
}

/// One line of an audit suite.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditLine {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

fn line(name: &str, value: f64, bound: f64) -> AuditLine {
    AuditLine { name: name.into(), value, bound, pass: value < bound }
}

/// Supremum of the scaled Bessel gap over log-spaced `s` in `[4, 1e4]`.
pub fn gap_sup() -> Result<f64> {
    let count = 4000;
    let step = (1e4f64 / 4.0).ln() / count as f64;
    (0..=count).map(|i| crate::special::asymptotic_gap(4.0 * (i as f64 * step).exp())).try_fold(0.0, |m, g| Ok(f64::max(m, g?)))
}

/// The five sampled phase constants for one seed, 100k pairs in the disc of radius 32.
pub fn phase_constants(seed: u64) -> [f64; 5] {
    let c = crate::special::sample_phase_constants(100_000, 32.0, seed);
    [c.one_lower, c.two_lower, c.grad_lower, c.hessian_upper, c.third_upper]
}

pub const AUDIT_SUITES: [&str; 4] = ["identity", "special", "infrastructure", "all"];

/// Runs a named audit suite; unknown names are rejected.
pub fn audit(suite: &str) -> Result<Vec<AuditLine>> {
    use crate::propagators::{free_wave_evolve, FreeWaveData};
    use crate::spectral::lp;
    let mut out = Vec::new();
    let all = suite == "all";
    if !AUDIT_SUITES.contains(&suite) {
        return Err(Error::InvalidArgument(format!("unknown audit suite {suite}; expected one of {AUDIT_SUITES:?}")));
    }
    if all || suite == "identity" {
        let r = identity_audit(25, 7)?;
        out.push(line("transform identity, corpus", r.worst, 1e-9));
        out.push(line("transform identity, gaussian subset", r.worst_gaussian, 1e-10));
    }
    if all || suite == "special" {
        let spec = crate::special::QuadratureSpec::default();
        let a = crate::special::sine_bessel_integral(2.0, 1.0, &spec)?;
        out.push(line("sine-Bessel (2,1) relative error", (a * 3f64.sqrt() - 1.0).abs(), 1e-4));
        let b = crate::special::sine_bessel_integral(5.0, 3.0, &spec)?;
        out.push(line("sine-Bessel (5,3) relative error", (4.0 * b - 1.0).abs(), 1e-4));
        out.push(line("asymptotic gap sup", gap_sup()?, 0.2));
        let at100 = crate::special::asymptotic_gap(100.0)?;
        out.push(line("asymptotic gap at 100, distance outside [0.05, 0.15]", (0.05 - at100).max(at100 - 0.15), 0.0));
        let (a, b) = (phase_constants(1), phase_constants(2));
        let lower = a.iter().chain(&b).cloned().fold(f64::INFINITY, f64::min);
        out.push(line("phase constants, negated minimum", -lower, 0.0));
        let spread = a.iter().zip(&b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs())).fold(0.0, f64::max);
        out.push(line("phase constants, seed spread", spread, 0.1));
    }
    if all || suite == "infrastructure" {
        let g = Grid::new(64, 10.0, 2.0 / 3.0)?;
        let u = g.field_from_fn(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 3.0).exp() * (1.0 + x[0]));
        let back = g.inverse(&g.forward(&u));
        out.push(line("FFT round trip", back.sub(&u).max_abs() / u.max_abs(), 1e-12));
        let plan = (g.l2(&u) - g.l2_spectral(&g.forward(&u))).abs() / g.l2(&u);
        out.push(line("Plancherel", plan, 1e-12));
        let worst = (1..2000)
            .map(|i| {
                let r = i as f64 * 0.01;
                (lp::K_RANGE.map(|k| lp::phi_k(k, r)).sum::<f64>() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        out.push(line("partition of unity", worst, 1e-14));
        let d = FreeWaveData { n0: g.forward(&u), n1: g.forward(&u.scale(0.5)), t0: 1.0 };
        let (a, at) = free_wave_evolve(&g, &d, 4.0)?;
        let (b, _) = free_wave_evolve(&g, &FreeWaveData { n0: a.clone(), n1: at, t0: 4.0 }, 9.0)?;
        let (c, _) = free_wave_evolve(&g, &d, 9.0)?;
        let scale = c.0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let group = b.0.iter().zip(&c.0).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
        out.push(line("propagator group property", group, 1e-12));
    }
    Ok(out)
}
