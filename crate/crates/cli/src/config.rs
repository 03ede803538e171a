//! Config-file schema: top-level keys `model`, `sim`, `grid`, `experiment`.

use mflab_core::error::{Error, Result};
use mflab_core::grid::{Grid1d, GridMeasure};
use mflab_core::particles::{InitialCondition, Scheme};
use mflab_core::potentials::ModelSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default = "default_experiment")]
    pub experiment: serde_json::Value,
}

fn default_experiment() -> serde_json::Value {
    serde_json::json!({})
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    pub n: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_scheme() -> Scheme {
    Scheme::EulerMaruyama
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSection {
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
}

impl GridSection {
    pub fn build(&self) -> Result<Grid1d> {
        Grid1d::new(self.lo, self.hi, self.m)
    }
}

/// Initial measure specification for grid flows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    Gaussian { mean: f64, sd: f64 },
    Uniform,
}

impl MeasureSpec {
    pub fn build(&self, grid: Grid1d) -> Result<GridMeasure> {
        match self {
            MeasureSpec::Gaussian { mean, sd } => GridMeasure::gaussian(grid, *mean, *sd),
            MeasureSpec::Uniform => Ok(GridMeasure::uniform(grid)),
        }
    }
}

impl RunConfig {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path}: {e}")))
    }

    pub fn sim(&self) -> Result<SimSection> {
        self.sim
            .ok_or_else(|| Error::Config("this subcommand needs a `sim` section".into()))
    }

    pub fn grid(&self) -> Result<Grid1d> {
        self.grid
            .ok_or_else(|| Error::Config("this subcommand needs a `grid` section".into()))?
            .build()
    }

    pub fn experiment<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.experiment.clone())
            .map_err(|e| Error::Config(format!("experiment section: {e}")))
    }
}

/// `check` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckExperiment {
    #[serde(default = "default_probe_box")]
    pub probe_box: Vec<(f64, f64)>,
    #[serde(default = "default_probes")]
    pub n_probes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probe_box() -> Vec<(f64, f64)> {
    vec![(-4.0, 4.0)]
}

fn default_probes() -> usize {
    2000
}

/// `simulate` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateExperiment {
    pub initial: InitialCondition,
    #[serde(default)]
    pub initial_velocity: Option<InitialCondition>,
}

/// `pde` / `first-order` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeExperiment {
    pub initial: MeasureSpec,
    #[serde(default = "default_record")]
    pub record_every: usize,
    #[serde(default = "default_fit_window")]
    pub fit_window: (f64, f64),
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_iter")]
    pub fp_max_iter: usize,
}

fn default_record() -> usize {
    100
}

fn default_fit_window() -> (f64, f64) {
    (0.5, 5.0)
}

fn default_fp_tol() -> f64 {
    1e-10
}

fn default_fp_iter() -> usize {
    500
}

/// `kinetic` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KineticExperiment {
    pub initial_position: MeasureSpec,
    pub initial_velocity: MeasureSpec,
    pub v_grid: GridSection,
    #[serde(default = "default_record_kinetic")]
    pub record_every: usize,
    #[serde(default = "default_kinetic_fit_window")]
    pub fit_window: (f64, f64),
}

fn default_record_kinetic() -> usize {
    10
}

fn default_kinetic_fit_window() -> (f64, f64) {
    (1.0, 6.0)
}

/// `fixed-point` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointExperiment {
    #[serde(default = "default_fp_tol")]
    pub tol: f64,
    #[serde(default = "default_fp_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub init: Option<MeasureSpec>,
}

/// `uniformity` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformityExperiment {
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_budget")]
    pub particle_budget: usize,
    #[serde(default = "default_sweep_fit_window")]
    pub fit_window: (f64, f64),
    #[serde(default = "default_smooth")]
    pub smooth_window: f64,
    #[serde(default = "default_shift")]
    pub mean_shift: f64,
}

fn default_ns() -> Vec<usize> {
    vec![64, 128, 256, 512]
}

fn default_budget() -> usize {
    16384
}

fn default_sweep_fit_window() -> (f64, f64) {
    (4.0, 9.0)
}

fn default_smooth() -> f64 {
    1.0
}

fn default_shift() -> f64 {
    1.0
}

/// `chaos-gap` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChaosGapExperiment {
    pub initial: MeasureSpec,
    #[serde(default = "default_gap_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_gap_replicas")]
    pub replicas: usize,
    #[serde(default = "default_t_check")]
    pub t_check: f64,
    #[serde(default = "default_particle_dt")]
    pub particle_dt: f64,
    #[serde(default = "default_pde_record")]
    pub pde_record_every: usize,
    #[serde(default = "default_gap_threshold")]
    pub threshold: f64,
}

fn default_gap_ns() -> Vec<usize> {
    vec![500, 1000, 2000]
}

fn default_gap_replicas() -> usize {
    8
}

fn default_t_check() -> f64 {
    2.0
}

fn default_particle_dt() -> f64 {
    5e-4
}

fn default_pde_record() -> usize {
    1000
}

fn default_gap_threshold() -> f64 {
    0.05
}

/// `cesaro` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CesaroExperiment {
    pub nu: MeasureSpec,
    #[serde(default = "default_cesaro_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_cesaro_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// relative tolerance used by `--assert` at the largest n
    #[serde(default = "default_cesaro_tol")]
    pub tolerance: f64,
}

fn default_cesaro_ns() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

fn default_cesaro_samples() -> usize {
    120_000
}

fn default_cesaro_tol() -> f64 {
    0.05
}

/// `decoupling` experiment fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecouplingExperiment {
    #[serde(default = "default_dec_n")]
    pub n: usize,
    #[serde(default = "default_dec_trials")]
    pub trials: usize,
    #[serde(default = "default_dec_repeats")]
    pub repeats: usize,
    #[serde(default = "default_dec_lambda")]
    pub lambda: f64,
    #[serde(default = "default_psi")]
    pub psi: mflab_core::experiments::PsiKind,
    #[serde(default = "default_law")]
    pub law: mflab_core::experiments::SampleLaw,
    #[serde(default)]
    pub seed: u64,
}

fn default_dec_n() -> usize {
    20
}

fn default_dec_trials() -> usize {
    400
}

fn default_dec_repeats() -> usize {
    200
}

fn default_dec_lambda() -> f64 {
    0.1
}

fn default_psi() -> mflab_core::experiments::PsiKind {
    mflab_core::experiments::PsiKind::Abs
}

fn default_law() -> mflab_core::experiments::SampleLaw {
    mflab_core::experiments::SampleLaw::StdNormal
}
