//! Experiment configuration files: TOML with `[grid]`, `[data]`, `[time]`
//! and `[analysis]` sections. Every semantic error carries the line of the
//! offending key.

use crate::evolution::{InitialDataParams, N1Shape, Schedule};
use crate::spectral::Grid;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Smoke,
    Decay,
    Cascade,
    Dichotomy,
    ThetaGrowth,
    Identity,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Smoke => "smoke",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Cascade => "cascade",
            ExperimentKind::Dichotomy => "dichotomy",
            ExperimentKind::ThetaGrowth => "theta-growth",
            ExperimentKind::Identity => "identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "two_thirds")]
    pub dealias: f64,
}

fn two_thirds() -> f64 {
    2.0 / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeName {
    Gaussian,
    Dipole,
    Mexican,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "eps_default")]
    pub epsilon: f64,
    #[serde(default = "radius_e_default")]
    pub radius_e: f64,
    #[serde(default = "radius_n_default")]
    pub radius_n: f64,
    #[serde(default)]
    pub moment: f64,
    #[serde(default)]
    pub n0_amplitude: f64,
    #[serde(default = "shape_default")]
    pub n1_shape: ShapeName,
    #[serde(default = "n1_amp_default")]
    pub n1_amplitude: f64,
    #[serde(default = "kappa_default")]
    pub kappa: f64,
    /// Seed of the manufactured-field corpus; PDE data do not use it.
    #[serde(default)]
    pub seed: u64,
}

fn eps_default() -> f64 {
    0.05
}
fn radius_e_default() -> f64 {
    1.5
}
fn radius_n_default() -> f64 {
    2.0
}
fn shape_default() -> ShapeName {
    ShapeName::Gaussian
}
fn n1_amp_default() -> f64 {
    0.05
}
fn kappa_default() -> f64 {
    0.3
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            epsilon: eps_default(),
            radius_e: radius_e_default(),
            radius_n: radius_n_default(),
            moment: 0.0,
            n0_amplitude: 0.0,
            n1_shape: shape_default(),
            n1_amplitude: n1_amp_default(),
            kappa: kappa_default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "t0_default")]
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Time between recorded samples.
    #[serde(default = "sample_default")]
    pub sample_every: f64,
    /// Write a binary snapshot every this many samples; 0 disables them.
    #[serde(default)]
    pub snapshot_every: usize,
}

fn t0_default() -> f64 {
    1.0
}
fn sample_default() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "p_default")]
    pub p: f64,
    #[serde(default = "p1_default")]
    pub p1: f64,
    #[serde(default = "delta_default")]
    pub delta: f64,
    pub c_e: Option<f64>,
    pub d_e: Option<f64>,
    #[serde(default = "k_min_default")]
    pub k_min: i32,
    #[serde(default)]
    pub k_max: i32,
    #[serde(default = "xi_default")]
    pub xi: Vec<f64>,
    #[serde(default = "ds_default")]
    pub ds: f64,
    #[serde(default = "windows_default")]
    pub windows: Vec<i32>,
    pub fit_from: Option<f64>,
    pub fit_to: Option<f64>,
    /// Corpus size for the identity audit.
    #[serde(default = "corpus_default")]
    pub corpus: usize,
}

fn p_default() -> f64 {
    0.75
}
fn p1_default() -> f64 {
    0.1
}
fn delta_default() -> f64 {
    0.1
}
fn k_min_default() -> i32 {
    -3
}
fn xi_default() -> Vec<f64> {
    vec![0.0, 0.125, 0.5]
}
fn ds_default() -> f64 {
    0.25
}
fn windows_default() -> Vec<i32> {
    vec![3, 4, 5]
}
fn corpus_default() -> usize {
    25
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            p: p_default(),
            p1: p1_default(),
            delta: delta_default(),
            c_e: None,
            d_e: None,
            k_min: k_min_default(),
            k_max: 0,
            xi: xi_default(),
            ds: ds_default(),
            windows: windows_default(),
            fit_from: None,
            fit_to: None,
            corpus: corpus_default(),
        }
    }
}

impl AnalysisSection {
    pub fn c_e(&self) -> f64 {
        self.c_e.unwrap_or(self.delta)
    }
    pub fn d_e(&self) -> f64 {
        self.d_e.unwrap_or(-self.delta)
    }
}

/// A full experiment description.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output: Option<String>,
    pub grid: GridSection,
    #[serde(default)]
    pub data: DataSection,
    pub time: TimeSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn line_of(offset: usize, text: &str) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, or of the section header, or 1.
fn locate(text: &str, section: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if section == Some(name.trim()) {
                header_line = Some(i + 1);
            }
            continue;
        }
        let k = line.split('=').next().unwrap_or("").trim();
        if k == key && current.as_deref() == section {
            return i + 1;
        }
    }
    header_line.unwrap_or(1)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(s.start, text)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let fail = |section: Option<&str>, key: &str, message: String| {
            Err(Error::Config { line: locate(text, section, key), message })
        };
        let g = &self.grid;
        if g.points < 16 || g.points % 2 != 0 {
            return fail(Some("grid"), "points", format!("points = {} must be even and at least 16", g.points));
        }
        if !(g.half_width > 0.0) {
            return fail(Some("grid"), "half_width", "half_width must be positive".into());
        }
        if !(g.dealias > 0.0 && g.dealias <= 1.0) {
            return fail(Some("grid"), "dealias", format!("dealias = {} must lie in (0, 1]", g.dealias));
        }
        let t = &self.time;
        if t.t0 != 1.0 {
            return fail(Some("time"), "t0", format!("t0 = {} but the initial time is fixed at 1", t.t0));
        }
        if !(t.t_end > t.t0) {
            return fail(Some("time"), "t_end", format!("t_end = {} must exceed t0", t.t_end));
        }
        let dx = 2.0 * g.half_width / g.points as f64;
        if !(t.dt > 0.0) || t.dt > dx / 2.0 {
            return fail(Some("time"), "dt", format!("dt = {} must lie in (0, dx/2 = {}]", t.dt, dx / 2.0));
        }
        let stride = t.sample_every / t.dt;
        if !(t.sample_every > 0.0) || (stride - stride.round()).abs() > 1e-9 {
            return fail(Some("time"), "sample_every", format!("sample_every = {} must be a multiple of dt", t.sample_every));
        }
        let d = &self.data;
        let radius = d.radius_e.max(d.radius_n);
        let evolves = !matches!(self.experiment, ExperimentKind::ThetaGrowth | ExperimentKind::Identity);
        if evolves && g.half_width < radius + (t.t_end - t.t0) + 2.0 {
            return fail(
                Some("time"),
                "t_end",
                format!("box too small: L = {} < R0 + T + 2 = {}", g.half_width, radius + (t.t_end - t.t0) + 2.0),
            );
        }
        if !(d.epsilon >= 0.0) {
            return fail(Some("data"), "epsilon", "epsilon must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&d.kappa) {
            return fail(Some("data"), "kappa", format!("kappa = {} must lie in [0, 1]", d.kappa));
        }
        let a = &self.analysis;
        if !(a.p > 0.0 && a.p < 1.0) {
            return fail(Some("analysis"), "p", format!("p = {} must lie in (0, 1)", a.p));
        }
        if !(a.delta > 0.0) || !(a.c_e() > 0.0) || !(a.d_e() < 0.0) {
            return fail(Some("analysis"), "delta", "need delta > 0, C_E > 0 and D_E < 0".into());
        }
        if a.k_min > a.k_max {
            return fail(Some("analysis"), "k_min", "k_min exceeds k_max".into());
        }
        if !(a.ds > 0.0) {
            return fail(Some("analysis"), "ds", "ds must be positive".into());
        }
        if self.experiment == ExperimentKind::Cascade && d.moment == 0.0 {
            return fail(Some("data"), "moment", "the cascade experiment needs a nonzero moment".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.points, self.grid.half_width, self.grid.dealias)
    }

    pub fn initial_data(&self) -> InitialDataParams {
        let d = &self.data;
        InitialDataParams {
            epsilon: d.epsilon,
            radius_e: d.radius_e,
            radius_n: d.radius_n,
            moment: d.moment,
            n0_amplitude: d.n0_amplitude,
            n1_shape: match d.n1_shape {
                ShapeName::Gaussian => N1Shape::Gaussian,
                ShapeName::Dipole => N1Shape::Dipole,
                ShapeName::Mexican => N1Shape::Mexican,
            },
            n1_amplitude: d.n1_amplitude,
            kappa: d.kappa,
            t0: self.time.t0,
        }
    }

    pub fn schedule(&self, companion: bool) -> Schedule {
        Schedule {
            dt: self.time.dt,
            t_end: self.time.t_end,
            stride: (self.time.sample_every / self.time.dt).round() as usize,
            companion,
        }
    }
}
