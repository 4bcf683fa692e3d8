//! Strang-split integration of
//!
//! ```text
//!   n_tt - Laplace n       = Laplace |E|^2
//!   E_tt - Laplace E + E   = -n E
//! ```
//!
//! with the linear flows taken exactly in frequency space and the sources
//! applied as a velocity kick. The companion field `m` with
//! `m_tt - Laplace m = |E|^2`, zero data, is co-evolved by a separate
//! kick-drift-kick scheme so that `n = l + Laplace m` can serve as an
//! independent check on the integrator.

use crate::propagators::{FlowTable, FreeWaveData};
use crate::spectral::{bracket, Field, Grid, Spectrum};
use crate::{Error, Result, C64};

/// Physical-space state.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub n: Field,
    pub nt: Field,
    pub e: [Field; 2],
    pub et: [Field; 2],
}

/// Frequency-space state; the working representation of the integrator.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub n: Spectrum,
    pub nt: Spectrum,
    pub e: [Spectrum; 2],
    pub et: [Spectrum; 2],
}

/// `(m, m_t)` in frequency space.
#[derive(Clone, Debug, PartialEq)]
pub struct Companion {
    pub m: Spectrum,
    pub mt: Spectrum,
}

impl Companion {
    pub fn zero(grid: &Grid) -> Self {
        Companion { m: Spectrum::zeros(grid.len()), mt: Spectrum::zeros(grid.len()) }
    }
}

impl SpectralState {
    pub fn zero(grid: &Grid, t: f64) -> Self {
        let z = Spectrum::zeros(grid.len());
        SpectralState { t, n: z.clone(), nt: z.clone(), e: [z.clone(), z.clone()], et: [z.clone(), z] }
    }

    pub fn to_fields(&self, grid: &Grid) -> FieldState {
        FieldState {
            t: self.t,
            n: grid.inverse(&self.n),
            nt: grid.inverse(&self.nt),
            e: [grid.inverse(&self.e[0]), grid.inverse(&self.e[1])],
            et: [grid.inverse(&self.et[0]), grid.inverse(&self.et[1])],
        }
    }

    pub fn from_fields(grid: &Grid, s: &FieldState) -> Self {
        SpectralState {
            t: s.t,
            n: grid.forward(&s.n),
            nt: grid.forward(&s.nt),
            e: [grid.forward(&s.e[0]), grid.forward(&s.e[1])],
            et: [grid.forward(&s.et[0]), grid.forward(&s.et[1])],
        }
    }

    pub fn spectra(&self) -> [&Spectrum; 6] {
        [&self.n, &self.nt, &self.e[0], &self.e[1], &self.et[0], &self.et[1]]
    }

    pub fn is_finite(&self) -> bool {
        self.spectra().iter().all(|s| s.is_finite())
    }

    /// Largest difference over all components, in spectral L^2.
    pub fn distance(&self, grid: &Grid, other: &SpectralState) -> f64 {
        self.spectra()
            .iter()
            .zip(other.spectra())
            .map(|(a, b)| grid.l2_spectral(&a.sub(b)))
            .fold(0.0, f64::max)
    }

    /// Free-wave data `(n, n_t)` of this state, used when it is the initial one.
    pub fn free_wave_data(&self) -> FreeWaveData {
        FreeWaveData { n0: self.n.clone(), n1: self.nt.clone(), t0: self.t }
    }

    /// `|E|^2` in frequency space, dealiased.
    pub fn density(&self, grid: &Grid) -> Spectrum {
        let [e1, e2] = grid.inverse_pair(&self.e[0], &self.e[1]);
        grid.dealias(&grid.forward(&e1.mul(&e1).add(&e2.mul(&e2))))
    }
}

/// Shape of the density velocity `n1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum N1Shape {
    /// Gaussian with integral equal to the configured moment.
    Gaussian,
    /// `x1` times a Gaussian: odd, so its integral vanishes.
    Dipole,
    /// Radial `(1 - |x|^2/r^2) e^{-|x|^2/r^2}`, integral zero, `n1_hat = O(|xi|^2)`.
    Mexican,
}

/// Parameters of the Gaussian-envelope initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDataParams {
    /// Amplitude of E.
    pub epsilon: f64,
    pub radius_e: f64,
    pub radius_n: f64,
    /// `int n1 dx`; only used by the Gaussian shape.
    pub moment: f64,
    /// Peak of n0.
    pub n0_amplitude: f64,
    pub n1_shape: N1Shape,
    /// Peak of n1 for the zero-mean shapes.
    pub n1_amplitude: f64,
    /// Ellipticity in [0, 1]: `E_t = epsilon <D> G (kappa, (1-kappa^2)^{1/2})`.
    pub kappa: f64,
    pub t0: f64,
}

impl Default for InitialDataParams {
    fn default() -> Self {
        InitialDataParams {
            epsilon: 0.05,
            radius_e: 1.5,
            radius_n: 2.0,
            moment: 0.3,
            n0_amplitude: 0.0,
            n1_shape: N1Shape::Gaussian,
            n1_amplitude: 0.05,
            kappa: 0.3,
            t0: 1.0,
        }
    }
}

impl InitialDataParams {
    pub fn radius(&self) -> f64 {
        self.radius_e.max(self.radius_n)
    }
}

fn gaussian(x: [f64; 2], r: f64) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1]) / (r * r)).exp()
}

/// Builds the dealiased initial state at `t0`.
pub fn make_initial_data(grid: &Grid, p: &InitialDataParams) -> Result<SpectralState> {
    let quarter = grid.half_width() / 4.0;
    if !(p.radius_e > 0.0 && p.radius_n > 0.0) || p.radius() >= quarter {
        return Err(Error::DomainTooSmall(format!(
            "data radii ({}, {}) must be positive and below L/4 = {quarter}",
            p.radius_e, p.radius_n
        )));
    }
    if !(p.epsilon >= 0.0) || !(0.0..=1.0).contains(&p.kappa) {
        return Err(Error::InvalidArgument(format!("epsilon = {} and kappa = {} out of range", p.epsilon, p.kappa)));
    }
    let ge = grid.forward(&grid.field_from_fn(|x| p.epsilon * gaussian(x, p.radius_e)));
    let bracket_ge = grid.apply_real(&ge, |xi| bracket(crate::spectral::norm2(xi)));
    let lambda = (1.0 - p.kappa * p.kappa).sqrt();
    let n0 = grid.forward(&grid.field_from_fn(|x| p.n0_amplitude * gaussian(x, p.radius_n)));
    let r = p.radius_n;
    let mut n1 = match p.n1_shape {
        N1Shape::Gaussian => {
            grid.forward(&grid.field_from_fn(|x| p.moment / (std::f64::consts::PI * r * r) * gaussian(x, r)))
        }
        N1Shape::Dipole => grid.forward(&grid.field_from_fn(|x| p.n1_amplitude * x[0] / r * gaussian(x, r))),
        N1Shape::Mexican => grid.forward(
            &grid.field_from_fn(|x| p.n1_amplitude * (1.0 - (x[0] * x[0] + x[1] * x[1]) / (r * r)) * gaussian(x, r)),
        ),
    };
    let moment = match p.n1_shape {
        N1Shape::Gaussian => p.moment,
        _ => 0.0,
    };
    let mut state = SpectralState {
        t: p.t0,
        n: grid.dealias(&n0),
        nt: Spectrum::zeros(grid.len()),
        e: [grid.dealias(&ge), Spectrum::zeros(grid.len())],
        et: [grid.dealias(&bracket_ge.scale(C64::new(p.kappa, 0.0))), grid.dealias(&bracket_ge.scale(C64::new(lambda, 0.0)))],
    };
    // The zero mode of the spectrum is exactly dx^2 times the grid sum.
    n1.0[Grid::ZERO_MODE] = C64::new(moment, 0.0);
    state.nt = grid.dealias(&n1);
    Ok(state)
}

/// One Strang step of fixed size, with cached linear flows.
pub struct Stepper {
    grid: Grid,
    dt: f64,
    wave_half: FlowTable,
    kg_half: FlowTable,
    wave_full: FlowTable,
    cached_density: Option<(f64, Spectrum)>,
}

impl Stepper {
    pub fn new(grid: &Grid, dt: f64) -> Result<Self> {
        if !(dt.abs() > 0.0) || dt.abs() > 0.5 * grid.dx() {
            return Err(Error::InvalidArgument(format!("time step {dt} must satisfy 0 < |dt| <= dx/2 = {}", 0.5 * grid.dx())));
        }
        Ok(Stepper {
            grid: grid.clone(),
            dt,
            wave_half: FlowTable::new(grid, 0.0, 0.5 * dt),
            kg_half: FlowTable::new(grid, 1.0, 0.5 * dt),
            wave_full: FlowTable::new(grid, 0.0, dt),
            cached_density: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn drift(&self, s: &mut SpectralState) {
        self.wave_half.apply(&mut s.n.0, &mut s.nt.0);
        for c in 0..2 {
            self.kg_half.apply(&mut s.e[c].0, &mut s.et[c].0);
        }
    }

    fn kick(&self, s: &mut SpectralState) {
        let g = &self.grid;
        let n = g.inverse(&s.n);
        let e = g.inverse_pair(&s.e[0], &s.e[1]);
        let dens = g.dealias(&g.forward(&e[0].mul(&e[0]).add(&e[1].mul(&e[1]))));
        for (i, v) in s.nt.0.iter_mut().enumerate() {
            let xi = g.xi(i);
            *v -= dens.0[i] * (self.dt * (xi[0] * xi[0] + xi[1] * xi[1]));
        }
        let src = g.forward_pair(&n.mul(&e[0]), &n.mul(&e[1]));
        for c in 0..2 {
            s.et[c].axpy(C64::new(-self.dt, 0.0), &g.dealias(&src[c]));
        }
    }

    /// Advances the state by one step.
    pub fn step(&mut self, s: &mut SpectralState) {
        self.drift(s);
        self.kick(s);
        self.drift(s);
        s.t += self.dt;
    }

    /// Advances state and companion together.
    pub fn step_with_companion(&mut self, s: &mut SpectralState, m: &mut Companion) {
        let start = match self.cached_density.take() {
            Some((t, d)) if t == s.t => d,
            _ => s.density(&self.grid),
        };
        m.mt.axpy(C64::new(0.5 * self.dt, 0.0), &start);
        self.wave_full.apply(&mut m.m.0, &mut m.mt.0);
        self.step(s);
        let end = s.density(&self.grid);
        m.mt.axpy(C64::new(0.5 * self.dt, 0.0), &end);
        self.cached_density = Some((s.t, end));
    }
}

/// Snapshot passed to observers during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub state: SpectralState,
    pub companion: Option<Companion>,
}

/// Integration schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between snapshots.
    pub stride: usize,
    pub companion: bool,
}

impl Schedule {
    pub fn steps(&self, t0: f64) -> usize {
        ((self.t_end - t0) / self.dt).round() as usize
    }
}

/// `L >= R0 + (t_end - t0) + 2`.
pub fn check_box(grid: &Grid, radius: f64, t0: f64, t_end: f64) -> Result<()> {
    let need = radius + (t_end - t0) + 2.0;
    if grid.half_width() < need {
        return Err(Error::DomainTooSmall(format!(
            "L = {} is below R0 + T + 2 = {need}; waves would wrap around",
            grid.half_width()
        )));
    }
    Ok(())
}

/// Integrates from `initial`, calling `observer` on every snapshot including
/// the first. Stops with `Error::Diverged` on non-finite values.
pub fn evolve_with(
    grid: &Grid,
    initial: SpectralState,
    schedule: &Schedule,
    mut observer: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<()> {
    if schedule.stride == 0 {
        return Err(Error::InvalidArgument("snapshot stride must be positive".into()));
    }
    let mut stepper = Stepper::new(grid, schedule.dt)?;
    let steps = schedule.steps(initial.t);
    let t0 = initial.t;
    let mut snap = Snapshot { state: initial, companion: schedule.companion.then(|| Companion::zero(grid)) };
    observer(&snap)?;
    for k in 1..=steps {
        match snap.companion.as_mut() {
            Some(m) => stepper.step_with_companion(&mut snap.state, m),
            None => stepper.step(&mut snap.state),
        }
        // Avoid drift of the clock over long runs.
        snap.state.t = t0 + k as f64 * schedule.dt;
        if k % schedule.stride == 0 || k == steps {
            if !snap.state.is_finite() {
                return Err(Error::Diverged { t: snap.state.t });
            }
            observer(&snap)?;
        }
    }
    Ok(())
}

/// Ordered snapshots of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.state.t).collect()
    }
}

/// Collects every snapshot of a run.
pub fn evolve(grid: &Grid, initial: SpectralState, schedule: &Schedule) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    evolve_with(grid, initial, schedule, |s| {
        snapshots.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory { dt: schedule.dt, snapshots })
}

/// `||n - l - Laplace m|| / max(||n||, eps^2)` for one snapshot.
pub fn decomposition_residual(grid: &Grid, snap: &Snapshot, data: &FreeWaveData, eps: f64) -> Result<f64> {
    let m = snap
        .companion
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("decomposition check needs the companion field".into()))?;
    let (l, _) = crate::propagators::free_wave_evolve(grid, data, snap.state.t)?;
    let lap_m = grid.laplacian(&m.m);
    let resid = snap.state.n.sub(&l).sub(&lap_m);
    let denom = grid.l2_spectral(&snap.state.n).max(eps * eps);
    Ok(if denom == 0.0 { grid.l2_spectral(&resid) } else { grid.l2_spectral(&resid) / denom })
}

/// Supremum of the decomposition residual over a trajectory.
pub fn check_decomposition(grid: &Grid, traj: &Trajectory, data: &FreeWaveData, eps: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in &traj.snapshots {
        worst = worst.max(decomposition_residual(grid, s, data, eps)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> Grid {
        Grid::new(64, 12.0, 2.0 / 3.0).unwrap()
    }

    fn params() -> InitialDataParams {
        InitialDataParams { epsilon: 0.2, radius_e: 1.0, radius_n: 1.2, moment: 0.3, n0_amplitude: 0.1, ..Default::default() }
    }

    #[test]
    fn initial_data_moment_is_pinned() {
        let g = small_grid();
        let s = make_initial_data(&g, &params()).unwrap();
        let nt = g.inverse(&s.nt);
        let sum: f64 = nt.0.iter().sum::<f64>() * g.dx() * g.dx();
        assert!((sum - 0.3).abs() < 1e-12, "{sum}");
        let dip = make_initial_data(&g, &InitialDataParams { n1_shape: N1Shape::Dipole, ..params() }).unwrap();
        assert_eq!(dip.nt.0[0], C64::new(0.0, 0.0));
        assert!(make_initial_data(&g, &InitialDataParams { radius_e: 3.5, ..params() }).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = small_grid();
        let p = InitialDataParams { epsilon: 0.0, moment: 0.0, n0_amplitude: 0.0, ..params() };
        let s = make_initial_data(&g, &p).unwrap();
        let traj = evolve(&g, s, &Schedule { dt: 0.1, t_end: 3.0, stride: 5, companion: true }).unwrap();
        for snap in &traj.snapshots {
            assert!(snap.state.spectra().iter().all(|s| s.0.iter().all(|v| *v == C64::new(0.0, 0.0))));
        }
    }

    #[test]
    fn rejects_large_step_and_small_box() {
        let g = small_grid();
        assert!(Stepper::new(&g, 0.3).is_err());
        assert!(check_box(&g, 2.0, 1.0, 20.0).is_err());
        assert!(check_box(&g, 2.0, 1.0, 8.0).is_ok());
    }

    #[test]
    fn free_wave_when_field_vanishes() {
        let g = small_grid();
        let p = InitialDataParams { epsilon: 0.0, ..params() };
        let s0 = make_initial_data(&g, &p).unwrap();
        let data = s0.free_wave_data();
        let traj = evolve(&g, s0, &Schedule { dt: 0.1, t_end: 4.0, stride: 10, companion: true }).unwrap();
        assert!(check_decomposition(&g, &traj, &data, 0.0).unwrap() < 1e-13);
    }

    #[test]
    fn field_is_free_after_one_step_from_vanishing_density() {
        let g = small_grid();
        let p = InitialDataParams { moment: 0.0, n0_amplitude: 0.0, ..params() };
        let mut s = make_initial_data(&g, &p).unwrap();
        let (e, et) = crate::propagators::free_kg_evolve(&g, &s.e[0], &s.et[0], 1.0, 1.1).unwrap();
        Stepper::new(&g, 0.1).unwrap().step(&mut s);
        assert!(g.l2_spectral(&s.e[0].sub(&e)) < 1e-14);
        assert!(g.l2_spectral(&s.et[0].sub(&et)) < 1e-14);
    }

    #[test]
    fn local_error_is_third_order() {
        let g = small_grid();
        let p = InitialDataParams { moment: 0.0, n0_amplitude: 0.0, epsilon: 0.5, ..params() };
        let s0 = make_initial_data(&g, &p).unwrap();
        let err = |dt: f64| {
            let mut coarse = s0.clone();
            Stepper::new(&g, dt).unwrap().step(&mut coarse);
            let mut fine = s0.clone();
            let mut st = Stepper::new(&g, dt / 64.0).unwrap();
            for _ in 0..64 {
                st.step(&mut fine);
            }
            coarse.distance(&g, &fine)
        };
        let ratio = err(0.16) / err(0.08);
        assert!((7.0..=9.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn time_reversal() {
        let g = small_grid();
        let s0 = make_initial_data(&g, &params()).unwrap();
        let mut s = s0.clone();
        Stepper::new(&g, 0.1).unwrap().step(&mut s);
        Stepper::new(&g, -0.1).unwrap().step(&mut s);
        assert!(s.distance(&g, &s0) < 1e-10 * g.l2_spectral(&s0.n).max(g.l2_spectral(&s0.e[0])));
        assert!((s.t - s0.t).abs() < 1e-15);
    }

    #[test]
    fn zero_mode_law() {
        let g = small_grid();
        let s0 = make_initial_data(&g, &params()).unwrap();
        let n0 = s0.n.0[0].re;
        let traj = evolve(&g, s0, &Schedule { dt: 0.05, t_end: 5.0, stride: 20, companion: false }).unwrap();
        for snap in &traj.snapshots {
            let s = &snap.state;
            assert!((s.nt.0[0].re - 0.3).abs() < 1e-10);
            assert!((s.n.0[0].re - n0 - 0.3 * (s.t - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_propagation() {
        let g = Grid::new(256, 20.0, 2.0 / 3.0).unwrap();
        let p = InitialDataParams { epsilon: 0.2, radius_e: 1.2, radius_n: 1.2, n0_amplitude: 0.1, ..params() };
        let r0 = 7.0 * 1.2;
        let mut s0 = make_initial_data(&g, &p).unwrap();
        // <D> G has exponential tails; use compactly concentrated velocities.
        for c in 0..2 {
            s0.et[c] = g.dealias(&g.forward(&g.field_from_fn(|x| 0.1 * (c as f64 + 1.0) * gaussian(x, 1.2))));
        }
        let traj = evolve(&g, s0, &Schedule { dt: 0.05, t_end: 7.0, stride: 40, companion: false }).unwrap();
        for snap in &traj.snapshots {
            let f = snap.state.to_fields(&g);
            let radius = r0 + (snap.state.t - 1.0) + 2.0 * g.dx();
            let outside = |u: &Field| {
                (0..g.len())
                    .filter(|&i| crate::spectral::norm2(g.point(i)) > radius)
                    .map(|i| u.0[i].abs())
                    .fold(0.0, f64::max)
            };
            let scale_n = f.n.max_abs().max(f.nt.max_abs());
            let scale_e = f.e[0].max_abs().max(f.e[1].max_abs());
            assert!(outside(&f.n) < 1e-9 * scale_n, "n tail {}", outside(&f.n) / scale_n);
            assert!(outside(&f.e[0]).max(outside(&f.e[1])) < 1e-6 * scale_e, "E tail {} at {}", outside(&f.e[0]).max(outside(&f.e[1])) / scale_e, snap.state.t);
        }
    }
}
