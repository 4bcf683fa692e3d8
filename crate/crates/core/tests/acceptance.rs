//! Acceptance harness. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Every tolerance is pinned below.

use kgz::diagnostics::{fit_rate, median, FitModel};
use kgz::evolution::{make_initial_data, InitialDataParams, N1Shape, Schedule, Snapshot};
use kgz::experiments::{
    audit, convergence_study, dichotomy_run, gap_sup, identity_audit, phase_constants, reference_run, theta_growth_run,
    ProfileAnalysis, ReferenceSeries,
};
use kgz::scattering::{cascade_experiment, integrated_identity, LatticeLowWave};
use kgz::spectral::Grid;
use kgz::transform::scattering_criterion;
use std::time::Instant;

// The steppers allocate spectra of a megabyte or more per transform; the
// system allocator returns them to the kernel each time.
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// A value of "about 4" or "about 16" is accepted within 20%.
const ABOUT: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn about(value: f64, target: f64) -> bool {
    (value / target - 1.0).abs() <= ABOUT
}

fn reference_grid() -> Grid {
    Grid::new(256, 48.0, 2.0 / 3.0).unwrap()
}

/// Small data with the n1 radius chosen so the free density carries the
/// energy norm from the first instant on.
fn reference_params() -> InitialDataParams {
    InitialDataParams {
        epsilon: 0.05,
        radius_e: 1.5,
        radius_n: 1.25,
        moment: 0.3,
        n0_amplitude: 0.0,
        n1_shape: N1Shape::Gaussian,
        n1_amplitude: 0.0,
        kappa: 0.15,
        t0: 1.0,
    }
}

const REFERENCE_DT: f64 = 1.0 / 256.0;
const REFERENCE_END: f64 = 40.0;
const REFERENCE_SAMPLE: f64 = 0.25;
/// Start of the window of the integrated identity.
const INTEGRATED_START: f64 = 9.0;

struct Reference {
    series: ReferenceSeries,
    start: Snapshot,
    seconds: f64,
}

fn run_reference() -> Reference {
    let grid = reference_grid();
    let schedule = Schedule {
        dt: REFERENCE_DT,
        t_end: REFERENCE_END,
        stride: (REFERENCE_SAMPLE / REFERENCE_DT).round() as usize,
        companion: true,
    };
    let clock = Instant::now();
    let mut start = None;
    let series = reference_run(&grid, &reference_params(), &schedule, 0.75, |snap| {
        if (snap.state.t - INTEGRATED_START).abs() < 1e-9 {
            start = Some(snap.clone());
        }
        Ok(())
    })
    .unwrap();
    Reference { series, start: start.expect("snapshot at the window start"), seconds: clock.elapsed().as_secs_f64() }
}

fn in_window(series: &ReferenceSeries, values: &[f64], from: f64, to: f64) -> (Vec<f64>, Vec<f64>) {
    series.times.iter().zip(values).filter(|(t, _)| **t >= from - 1e-9 && **t <= to + 1e-9).map(|(t, v)| (*t, *v)).unzip()
}

fn criterion1() -> Outcome {
    let clock = Instant::now();
    let r = identity_audit(25, 7).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let pass = r.worst < 1e-9 && r.worst_gaussian < 1e-10 && secs < 10.0;
    outcome(pass, format!("worst {:.2e} (< 1e-9), gaussian subset {:.2e} (< 1e-10), {secs:.1} s (< 10 s)", r.worst, r.worst_gaussian))
}

fn criterion2(reference: &Reference) -> Outcome {
    let grid = reference_grid();
    let params = reference_params();
    let worst = reference.series.identity.iter().skip(1).cloned().fold(0.0, f64::max);
    let clock = Instant::now();
    let initial = make_initial_data(&grid, &params).unwrap();
    let data = initial.free_wave_data();
    let wave = LatticeLowWave::new(&grid, &data, 0.75).unwrap();
    let start = &reference.start;
    let r = integrated_identity(
        &grid,
        &start.state,
        start.companion.as_ref().unwrap(),
        &data,
        &wave,
        0.8,
        0.00125,
        &[0.2, 0.1, 0.05, 0.025],
        2.0,
    )
    .unwrap();
    let secs = reference.seconds + clock.elapsed().as_secs_f64();
    // The first triple is pre-asymptotic at the coarsest step.
    let ratio = r.ratios[1];
    let pass = worst < 1e-6 && about(ratio, 16.0) && secs < 300.0;
    outcome(
        pass,
        format!(
            "pointwise max {worst:.2e} (< 1e-6); Theta step halving ratio {ratio:.2} (16 +- 20%), ratios {:?}; {secs:.0} s (< 300 s)",
            r.ratios.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion3() -> Outcome {
    let clock = Instant::now();
    let r = convergence_study(&reference_grid(), &reference_params(), 0.025, REFERENCE_END, 1.0).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let bound = 10.0 * r.self_convergence[0];
    let reduction = r.decomposition[0] / r.decomposition[1];
    let pass = r.decomposition[0] < bound && about(reduction, 4.0) && secs < 300.0;
    outcome(
        pass,
        format!(
            "residual {:.2e} (< 10 x self-convergence = {bound:.2e}); reduction {reduction:.2} (4 +- 20%), next {:.2}; {secs:.0} s (< 300 s)",
            r.decomposition[0],
            r.decomposition[1] / r.decomposition[2]
        ),
    )
}

fn criterion4(reference: &Reference) -> Outcome {
    let s = &reference.series;
    let eps = reference_params().epsilon;
    let (_, e_env) = in_window(s, &s.e_envelope, 8.0, 40.0);
    let (_, n_env) = in_window(s, &s.n_envelope, 8.0, 40.0);
    let spread = |v: &[f64]| {
        let m = median(v);
        let hi = v.iter().cloned().fold(0.0, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi / m).max(m / lo)
    };
    // fit_rate needs a factor 8 between the ends, so the fit starts at 5.
    let (t, y) = in_window(s, &s.sup_e, 5.0, 40.0);
    let alpha = fit_rate(&t, &y, FitModel::PowerLaw).unwrap().coeffs[1];
    let e_max = s.e_envelope.iter().cloned().fold(0.0, f64::max);
    let n_max = s.n_envelope.iter().cloned().fold(0.0, f64::max);
    let (e_spread, n_spread) = (spread(&e_env), spread(&n_env));
    let pass = e_spread <= 2.0 && (alpha + 1.0).abs() <= 0.15 && n_spread <= 3.0 && e_max <= 30.0 * eps && n_max <= 30.0 * eps;
    outcome(
        pass,
        format!(
            "E envelope spread {e_spread:.2} (<= 2), alpha {alpha:.3} (-1 +- 0.15), n envelope spread {n_spread:.2} (<= 3), maxima {e_max:.3}, {n_max:.3} (<= 30 eps = {:.2})",
            30.0 * eps
        ),
    )
}

fn variation(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(0.0, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo - 1.0
}

fn criterion5(reference: &Reference) -> Outcome {
    let s = &reference.series;
    let (a, b) = (variation(&s.n_energy), variation(&s.e_sobolev));
    outcome(a < 0.25 && b < 0.25, format!("H4 density energy varies {:.1}%, H6 field {:.1}% (< 25%)", 100.0 * a, 100.0 * b))
}

fn cascade_grid() -> Grid {
    Grid::new(128, 280.0, 2.0 / 3.0).unwrap()
}

/// Wide profiles, resolved on the coarse cascade grid.
fn cascade_params(epsilon: f64) -> InitialDataParams {
    InitialDataParams { epsilon, radius_e: 8.0, radius_n: 8.0, moment: 0.3, kappa: 0.3, ..reference_params() }
}

fn criterion6() -> Outcome {
    let clock = Instant::now();
    let grid = cascade_grid();
    let schedule = Schedule { dt: 0.25, t_end: 256.0, stride: 4, companion: false };
    let free = cascade_experiment(&grid, &cascade_params(0.0), &schedule, 32.0, 256.0).unwrap();
    let full = cascade_experiment(&grid, &cascade_params(0.05), &schedule, 32.0, 256.0).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let growth = full.sup_dn / full.dn_at_4;
    let pass = (0.9..=1.1).contains(&free.ratio) && (0.8..=1.2).contains(&full.ratio) && growth <= 1.5 && secs < 900.0;
    outcome(
        pass,
        format!(
            "free b/b* {:.3} ([0.9, 1.1]), full b/b* {:.3} ([0.8, 1.2]), sup |dn| / value at 4 {growth:.3} (<= 1.5), {secs:.0} s (< 900 s)",
            free.ratio, full.ratio
        ),
    )
}

fn criterion7() -> Outcome {
    let clock = Instant::now();
    // Equal spacing in log t, eight per octave, so that every octave of
    // [256, 4096] carries the same weight in the log-slope fit. Uniform
    // spacing in t would put half the points in the last octave, where the
    // slope still rings with the cone singularity of the free wave.
    let mut times: Vec<f64> = (1..8).map(|k| f64::from(1 << k)).collect();
    times.extend((0..=32).map(|k| 256.0 * 2f64.powf(f64::from(k) / 8.0)));
    let (_, growth) = theta_growth_run(&reference_params(), 0.75, 0.5, &[0.0, 0.125, 0.5], &times, 256.0).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let pass = growth.iter().all(|g| (0.85..=1.15).contains(&g.ratio)) && secs < 120.0;
    let text: Vec<String> = growth.iter().map(|g| format!("xi {}: {:.3}", g.xi[0], g.ratio)).collect();
    outcome(pass, format!("slope / (pi mu) {} ([0.85, 1.15]), {secs:.0} s (< 120 s)", text.join(", ")))
}

fn criterion8() -> Outcome {
    let clock = Instant::now();
    // Windows [16, 32], [32, 64] and [64, 128]; the earlier ones are still
    // dominated by the ray remainder of the phase correction.
    let grid = Grid::new(384, 132.0, 2.0 / 3.0).unwrap();
    let schedule = Schedule { dt: 0.1, t_end: 128.0, stride: 10, companion: false };
    let analysis = ProfileAnalysis { p: 0.75, ds: 0.25, windows: vec![4, 5, 6], bands: -3..=0, c_e: 0.1, d_e: -0.1 };
    let low = InitialDataParams { moment: 0.0, n1_shape: N1Shape::Dipole, n1_amplitude: 0.05, ..reference_params() };
    let zero = dichotomy_run(&grid, &low, &schedule, &analysis).unwrap();
    let charged = dichotomy_run(&grid, &reference_params(), &schedule, &analysis).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let pass = zero.plain_ratio <= 0.8 && charged.plain_ratio >= 0.8 && charged.modified_ratio <= 0.8 && secs < 1200.0;
    outcome(
        pass,
        format!(
            "mu = 0 plain {:.3} (<= 0.8); mu = 0.3 plain {:.3} (>= 0.8), modified {:.3} (<= 0.8); {secs:.0} s (< 1200 s)",
            zero.plain_ratio, charged.plain_ratio, charged.modified_ratio
        ),
    )
}

fn criterion9(reference: &Reference) -> Outcome {
    let s = &reference.series;
    let decrease = |values: &[f64]| {
        let w = scattering_criterion(&s.times, values).unwrap();
        let at = |m: i32| w.iter().find(|x| x.m == m).expect("window").sum;
        1.0 - at(4) / at(3)
    };
    let (boxed, lap) = (decrease(&s.box_tilde_n), decrease(&s.lap_density));
    outcome(
        boxed >= 0.25 && lap < 0.10,
        format!("Box n~ window sums drop {:.1}% (>= 25%), Laplace |E|^2 drop {:.1}% (< 10%)", 100.0 * boxed, 100.0 * lap),
    )
}

fn criterion10() -> Outcome {
    let lines = audit("special").unwrap();
    let gap = gap_sup().unwrap();
    let (a, b) = (phase_constants(1), phase_constants(2));
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.name.as_str()).collect();
    outcome(
        failed.is_empty(),
        format!("gap sup {gap:.3}, constants seed 1 {a:.3?}, seed 2 {b:.3?}; failing: {failed:?}"),
    )
}

fn rerun_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let text = "experiment = \"decay\"\n[grid]\nhalf_width = 12.0\npoints = 64\n[data]\nradius_e = 1.0\nradius_n = 1.0\nmoment = 0.3\n[time]\nt_end = 5.0\ndt = 0.05\nsample_every = 0.5\nsnapshot_every = 4\n";
    let cfg = kgz::config::ExperimentConfig::parse(text).unwrap();
    kgz::experiments::run_experiment(&cfg, dir).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion11() -> Outcome {
    let lines = audit("infrastructure").unwrap();
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| format!("{} {:.2e}", l.name, l.value)).collect();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (x, y) = (rerun_bytes(a.path()), rerun_bytes(b.path()));
    let identical = x == y && x.len() > 2;
    let summary: Vec<String> = lines.iter().map(|l| format!("{} {:.1e}", l.name, l.value)).collect();
    outcome(
        failed.is_empty() && identical,
        format!("{}; reruns byte-identical over {} files: {identical}", summary.join(", "), x.len()),
    )
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture; none apply here.
    let mut results = Vec::new();
    let mut report = |k: usize, name: &str, o: Outcome| {
        println!("criterion {k:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push(o.pass);
    };
    report(1, "transform identity", criterion1());
    let reference = run_reference();
    report(2, "residual identity", criterion2(&reference));
    report(3, "decomposition", criterion3());
    report(4, "sharp decay", criterion4(&reference));
    report(5, "uniform Sobolev bounds", criterion5(&reference));
    report(6, "energy cascade", criterion6());
    report(7, "phase growth", criterion7());
    report(8, "scattering dichotomy", criterion8());
    report(9, "decay upgrade", criterion9(&reference));
    report(10, "special functions", criterion10());
    report(11, "infrastructure", criterion11());
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
