//! Run configuration: a TOML document with a `[model]` section, a
//! `[numerics]` section and one optional section per experiment. Unknown keys
//! are rejected at every level.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fockchaos::fock::sector_dimension;
use fockchaos::hamiltonian::Geometry;
use fockchaos::Params;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Cbs,
    Otoc,
    Spectral,
    Actions,
    Twa,
    Modes,
}

impl Experiment {
    pub const ALL: [Experiment; 6] =
        [Experiment::Cbs, Experiment::Otoc, Experiment::Spectral, Experiment::Actions, Experiment::Twa, Experiment::Modes];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Cbs => "cbs",
            Experiment::Otoc => "otoc",
            Experiment::Spectral => "spectral",
            Experiment::Actions => "actions",
            Experiment::Twa => "twa",
            Experiment::Modes => "modes",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lattice {
    Open,
    Ring,
}

impl From<Lattice> for Geometry {
    fn from(l: Lattice) -> Self {
        match l {
            Lattice::Open => Geometry::Open,
            Lattice::Ring => Geometry::Ring,
        }
    }
}

/// Complex number as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sites: usize,
    pub particles: usize,
    #[serde(default = "one")]
    pub hopping: f64,
    /// On-site coupling `U` in `(U/2) n (n - 1)`.
    pub interaction: Option<f64>,
    /// `U N`, held fixed when the particle number is scanned.
    pub scaled_interaction: Option<f64>,
    /// Peierls phase per bond.
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "open")]
    pub geometry: Lattice,
    pub onsite: Option<Vec<f64>>,
    /// Width of uniform on-site disorder for ensemble experiments.
    #[serde(default)]
    pub disorder: f64,
}

fn one() -> f64 {
    1.0
}

fn open() -> Lattice {
    Lattice::Open
}

impl ModelConfig {
    /// Coupling `U` at particle number `n`.
    pub fn interaction_at(&self, n: usize) -> f64 {
        match (self.interaction, self.scaled_interaction) {
            (Some(u), _) => u,
            (None, Some(g)) => g / n.max(1) as f64,
            (None, None) => 0.0,
        }
    }

    pub fn scaled_at(&self, n: usize) -> f64 {
        self.interaction_at(n) * n as f64
    }

    /// Model parameters with `n` particles; `U` follows `scaled_interaction`
    /// when that is the declared coupling.
    pub fn params_at(&self, n: usize) -> Params {
        let onsite = self.onsite.clone().unwrap_or_else(|| vec![0.0; self.sites]);
        Params::new(self.sites, n, self.hopping, self.interaction_at(n), self.geometry.into())
            .with_phase(self.phase)
            .with_onsite(onsite)
    }

    pub fn params(&self) -> Params {
        self.params_at(self.particles)
    }

    fn validate(&self) -> Result<()> {
        if self.interaction.is_some() == self.scaled_interaction.is_some() {
            return Err(HarnessError::Config(
                "model: exactly one of 'interaction' and 'scaled_interaction' must be given".into(),
            ));
        }
        if let Some(e) = &self.onsite {
            if e.len() != self.sites {
                return Err(HarnessError::Config(format!(
                    "model: 'onsite' has {} entries for {} sites",
                    e.len(),
                    self.sites
                )));
            }
        }
        if !(self.disorder >= 0.0) || !self.disorder.is_finite() {
            return Err(HarnessError::Config("model: 'disorder' must be finite and non-negative".into()));
        }
        self.params().validate().map_err(|e| HarnessError::Config(format!("model: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Krylov and integrator tolerance.
    pub tol: f64,
    pub seed: u64,
    /// Worker threads; machine parallelism when absent.
    pub threads: Option<usize>,
    /// Largest sector dimension any experiment may build.
    pub max_dim: usize,
    /// One thread and fixed-order reductions.
    pub test_mode: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self { tol: 1e-10, seed: 1, threads: None, max_dim: 20_000, test_mode: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbsConfig {
    /// Peierls phases to sweep; the model phase is ignored.
    pub phases: Vec<f64>,
    pub realizations: usize,
    /// Fock states per realization, taken closest to the band center.
    pub initial_states: usize,
    /// Half-width, in eigenstates, of the neighbourhood that estimates the
    /// smooth local density of states.
    pub smoothing_levels: usize,
    /// Run length in units of the equilibration time.
    pub run_factor: f64,
    /// Cap on the run length in units of the Heisenberg time.
    pub max_tau: f64,
    pub time_samples: usize,
    pub lyapunov_time: f64,
    pub lyapunov_samples: usize,
    /// Explicit averaging window `[t_start, t_end]`; replaces the derived one.
    pub window: Option<[f64; 2]>,
}

impl Default for CbsConfig {
    fn default() -> Self {
        Self {
            phases: vec![0.0, PI / 12.0],
            realizations: 6,
            initial_states: 8,
            smoothing_levels: 5,
            run_factor: 20.0,
            max_tau: 0.25,
            time_samples: 200,
            lyapunov_time: 400.0,
            lyapunov_samples: 4,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OtocConfig {
    pub t_max: f64,
    pub dt: f64,
    /// Also compute the `(p_0, q_1)` quadrature OTOC.
    pub quadrature: bool,
    /// Random starts added to the sign-pattern guesses of the fixed-point search.
    pub random_guesses: usize,
    /// Explicit coherent-state center (unit norm after rescaling); skips
    /// the fixed-point search.
    pub initial_field: Option<Vec<Pair>>,
    pub min_points: usize,
    pub r2_min: f64,
    pub lyapunov_time: f64,
}

impl Default for OtocConfig {
    fn default() -> Self {
        Self {
            t_max: 80.0,
            dt: 1.0,
            quadrature: true,
            random_guesses: 16,
            initial_field: None,
            min_points: 5,
            r2_min: 0.98,
            lyapunov_time: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub members: usize,
    /// Peierls phases; each gets its own ensemble.
    pub phases: Vec<f64>,
    /// Add a `U = 0` ensemble with the same disorder.
    pub poisson_control: bool,
    pub unfold_degree: usize,
    pub keep_fraction: f64,
    pub tau_max: f64,
    pub tau_step: f64,
    /// Window `[lo, hi]` for the ramp slope through the origin.
    pub ramp_window: [f64; 2],
    /// Window `[lo, hi]` on which the form factor is compared with the
    /// random-matrix reference.
    pub compare_window: [f64; 2],
    pub spacing_bin: f64,
    pub spacing_max: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            members: 200,
            phases: vec![0.0],
            poisson_control: true,
            unfold_degree: 9,
            keep_fraction: 0.7,
            tau_max: 2.0,
            tau_step: 0.05,
            ramp_window: [0.1, 0.5],
            compare_window: [0.5, 2.0],
            spacing_bin: 0.1,
            spacing_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    pub sites: usize,
    pub particles: usize,
    pub scaled_interaction: f64,
    #[serde(default = "ring")]
    pub geometry: Lattice,
    /// Gaussian smoothing width in energy.
    #[serde(default = "three")]
    pub smoothing: f64,
    #[serde(default = "weyl_samples")]
    pub samples: usize,
    #[serde(default = "weyl_points")]
    pub points: usize,
}

fn ring() -> Lattice {
    Lattice::Ring
}

fn three() -> f64 {
    3.0
}

fn weyl_samples() -> usize {
    200_000
}

fn weyl_points() -> usize {
    41
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionsConfig {
    pub n_min: usize,
    pub n_max: usize,
    /// Energy per particle at which the density is sampled.
    pub energy: f64,
    /// Gaussian smoothing width of the quantum density, in energy.
    pub smoothing: f64,
    pub s_max: f64,
    pub background_degree: usize,
    pub peak_threshold: f64,
    /// Relative tolerance for matching a peak to a mode action.
    pub match_tolerance: f64,
    pub harmonics: usize,
    pub weyl: Option<WeylConfig>,
}

impl Default for ActionsConfig {
    fn default() -> Self {
        Self {
            n_min: 20,
            n_max: 400,
            energy: 0.25,
            smoothing: 0.3,
            s_max: PI,
            background_degree: 3,
            peak_threshold: 0.1,
            match_tolerance: 0.05,
            harmonics: 3,
            weyl: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwaConfig {
    pub samples: usize,
    pub t_max: f64,
    pub dt: f64,
    /// Initial coherent-state field, rescaled to `N` particles.
    pub initial_field: Option<Vec<Pair>>,
}

impl Default for TwaConfig {
    fn default() -> Self {
        Self { samples: 10_000, t_max: 50.0, dt: 1.0, initial_field: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    /// Energies per particle at which periodic modes are sought.
    pub energies: Vec<f64>,
    /// Sites whose occupation difference defines the return section.
    pub section: [usize; 2],
    pub scan_time: f64,
    pub scan_step: f64,
    pub random_guesses: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { energies: vec![0.25], section: [0, 1], scan_time: 100.0, scan_step: 0.01, random_guesses: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    pub output: Option<PathBuf>,
    pub cbs: Option<CbsConfig>,
    pub otoc: Option<OtocConfig>,
    pub spectral: Option<SpectralConfig>,
    pub actions: Option<ActionsConfig>,
    pub twa: Option<TwaConfig>,
    pub modes: Option<ModesConfig>,
}

/// Parse and validate; defaults are filled for the selected experiment's section.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
    cfg.fill_defaults();
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn new(experiment: Experiment, model: ModelConfig) -> Self {
        let mut cfg = Self {
            experiment: Some(experiment),
            model,
            numerics: NumericsConfig::default(),
            output: None,
            cbs: None,
            otoc: None,
            spectral: None,
            actions: None,
            twa: None,
            modes: None,
        };
        cfg.fill_defaults();
        cfg
    }

    pub fn fill_defaults(&mut self) {
        match self.experiment {
            Some(Experiment::Cbs) => {
                self.cbs.get_or_insert_with(Default::default);
            }
            Some(Experiment::Otoc) => {
                self.otoc.get_or_insert_with(Default::default);
            }
            Some(Experiment::Spectral) => {
                self.spectral.get_or_insert_with(Default::default);
            }
            Some(Experiment::Actions) => {
                self.actions.get_or_insert_with(Default::default);
            }
            Some(Experiment::Twa) => {
                self.twa.get_or_insert_with(Default::default);
            }
            Some(Experiment::Modes) => {
                self.modes.get_or_insert_with(Default::default);
            }
            None => {}
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment.ok_or_else(|| HarnessError::Config("no experiment selected".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let n = &self.numerics;
        if !(n.tol > 0.0 && n.tol < 1e-2) {
            return Err(HarnessError::Config(format!("numerics: tolerance {} outside (0, 1e-2)", n.tol)));
        }
        if n.threads == Some(0) {
            return Err(HarnessError::Config("numerics: 'threads' must be positive".into()));
        }
        if let Some(c) = &self.cbs {
            if c.phases.is_empty() || c.realizations == 0 || c.initial_states == 0 || c.time_samples == 0 {
                return Err(HarnessError::Config("cbs: phases, realizations, initial_states and time_samples must be non-empty".into()));
            }
            if c.smoothing_levels == 0 || !(c.run_factor > 0.0) || !(c.max_tau > 0.0) || !(c.lyapunov_time > 1.0) {
                return Err(HarnessError::Config("cbs: smoothing_levels, run_factor, max_tau and lyapunov_time must be positive".into()));
            }
            if c.lyapunov_samples == 0 {
                return Err(HarnessError::Config("cbs: lyapunov_samples must be positive".into()));
            }
            if let Some([a, b]) = c.window {
                if !(a >= 0.0 && b > a) {
                    return Err(HarnessError::Config("cbs: window must satisfy 0 <= start < end".into()));
                }
            }
        }
        if let Some(c) = &self.otoc {
            if !(c.dt > 0.0 && c.t_max > c.dt) {
                return Err(HarnessError::Config("otoc: need 0 < dt < t_max".into()));
            }
            if c.min_points < 3 || !(c.r2_min > 0.0 && c.r2_min <= 1.0) {
                return Err(HarnessError::Config("otoc: min_points >= 3 and r2_min in (0, 1] required".into()));
            }
            if let Some(f) = &c.initial_field {
                if f.len() != self.model.sites {
                    return Err(HarnessError::Config("otoc: initial_field length differs from the site count".into()));
                }
            }
        }
        if let Some(c) = &self.spectral {
            if c.members < 20 {
                return Err(HarnessError::Config(format!("spectral: ensemble size {} below 20", c.members)));
            }
            if c.phases.is_empty() || !(c.tau_step > 0.0 && c.tau_max > c.tau_step) {
                return Err(HarnessError::Config("spectral: need phases and 0 < tau_step < tau_max".into()));
            }
            if !(c.ramp_window[0] < c.ramp_window[1]) || !(c.compare_window[0] < c.compare_window[1]) {
                return Err(HarnessError::Config("spectral: windows must be increasing".into()));
            }
        }
        if let Some(c) = &self.actions {
            if !matches!(self.model.sites, 2 | 3) {
                return Err(HarnessError::Config("actions: the particle-number scan needs a dimer or trimer".into()));
            }
            if self.model.scaled_interaction.is_none() {
                return Err(HarnessError::Config("actions: the scan holds 'scaled_interaction' fixed; declare it".into()));
            }
            if c.n_min < 2 || c.n_max < c.n_min + 19 {
                return Err(HarnessError::Config("actions: need n_min >= 2 and at least 20 particle numbers".into()));
            }
            if !(c.smoothing > 0.0) || !(c.match_tolerance > 0.0) || c.harmonics == 0 {
                return Err(HarnessError::Config("actions: smoothing, match_tolerance and harmonics must be positive".into()));
            }
        }
        if let Some(c) = &self.twa {
            if c.samples < 2 || !(c.dt > 0.0 && c.t_max >= c.dt) {
                return Err(HarnessError::Config("twa: need at least two samples and 0 < dt <= t_max".into()));
            }
            if let Some(f) = &c.initial_field {
                if f.len() != self.model.sites {
                    return Err(HarnessError::Config("twa: initial_field length differs from the site count".into()));
                }
            }
        }
        if let Some(c) = &self.modes {
            if c.section[0] >= self.model.sites || c.section[1] >= self.model.sites || c.section[0] == c.section[1] {
                return Err(HarnessError::Config("modes: section sites invalid".into()));
            }
            if !(c.scan_step > 0.0 && c.scan_time > c.scan_step) {
                return Err(HarnessError::Config("modes: need 0 < scan_step < scan_time".into()));
            }
        }
        Ok(())
    }

    /// Fails fast when a sector would exceed `max_dim`.
    pub fn check_dim(&self, sites: usize, particles: usize) -> Result<usize> {
        let cap = self.numerics.max_dim;
        match sector_dimension(sites, particles) {
            Some(d) if d <= cap as u128 => Ok(d as usize),
            Some(d) => Err(HarnessError::Config(format!(
                "sector L = {sites}, N = {particles} has dimension {d}, above max_dim = {cap}"
            ))),
            None => Err(HarnessError::Config(format!("sector L = {sites}, N = {particles} is too large to count"))),
        }
    }
}
