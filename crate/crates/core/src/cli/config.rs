//! JSON experiment configuration. Matrices are row-major nested arrays.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{CheckOptions, SubstitutionMode, DEFAULT_N_MC};
use crate::error::{Error, Result};
use crate::kronalg::{Mat, PSD_CLAMP_RTOL};
use crate::levy::LevySpec;
use crate::sim::{regular_grid, InitialState, ModelParams, SimOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    /// Fixed starting value of `Y`; excludes a burn-in.
    #[serde(default)]
    pub y0: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    pub grid_step: f64,
    pub delta: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Burn-in length; `0` starts at `Y = 0`, absent means `10 / |lambda|`.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_lags")]
    pub lags: Vec<f64>,
    #[serde(default = "default_brownian_steps")]
    pub brownian_steps_per_unit: usize,
}

fn default_lags() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

fn default_brownian_steps() -> usize {
    1024
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Report {
    Paths,
    Jumps,
    Ladder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_reports")]
    pub reports: Vec<Report>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_reports() -> Vec<Report> {
    vec![Report::Paths, Report::Jumps]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_dir(), reports: default_reports() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_mode")]
    pub mode: SubstitutionMode,
    #[serde(default = "default_ks")]
    pub ks: Vec<u32>,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
}

fn default_mode() -> SubstitutionMode {
    SubstitutionMode::Exact
}

fn default_ks() -> Vec<u32> {
    vec![1, 2, 4]
}

fn default_n_mc() -> usize {
    DEFAULT_N_MC
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { mode: default_mode(), ks: default_ks(), n_mc: default_n_mc() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    /// Multiplies every acceptance tolerance; `1` is the shipped setting.
    #[serde(default = "one")]
    pub tolerance_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub levy: LevySpec,
    pub run: RunConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

/// A configuration that passed every module-level validation.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub params: ModelParams,
    pub levy: LevySpec,
    pub grid: Vec<f64>,
    pub sim: SimOptions,
    /// SHA-256 of the configuration text.
    pub config_hash: String,
}

/// Line of the first occurrence of `"key"`, for diagnostics.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

struct Diag<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Diag<'_> {
    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match line_of(self.text, key) {
            Some(l) => Error::Config(format!("{}:{l}: {key}: {msg}", self.origin)),
            None => Error::Config(format!("{}: {key}: {msg}", self.origin)),
        }
    }
}

fn matrix(rows: &[Vec<f64>], d: Option<usize>, key: &str, dg: &Diag) -> Result<Mat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(dg.err(key, "must be a non-empty square array of rows"));
    }
    if let Some(d) = d {
        if n != d {
            return Err(dg.err(key, format!("is {n}x{n}, expected {d}x{d}")));
        }
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(dg.err(key, "entries must be finite"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Mat::from_row_slice(n, n, &flat))
}

fn is_multiple(x: f64, step: f64) -> bool {
    let n = (x / step).round();
    n >= 1.0 && (n * step - x).abs() <= 1e-9 * x
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Experiment> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Experiment> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })?;
        let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        config.validate(&Diag { origin, text }, hash)
    }

    fn validate(self, dg: &Diag, config_hash: String) -> Result<Experiment> {
        let a = matrix(&self.model.a, None, "a", dg)?;
        let d = a.nrows();
        let b = matrix(&self.model.b, Some(d), "b", dg)?;
        let c = matrix(&self.model.c, Some(d), "c", dg)?;
        let params = ModelParams::new(a, b, c).map_err(|e| dg.err("c", e))?;
        if self.levy.dim != d {
            return Err(dg.err("dim", format!("Lévy dimension {} differs from model dimension {d}", self.levy.dim)));
        }
        self.levy.validate().map_err(|e| dg.err("levy", e))?;

        let r = &self.run;
        if r.n_paths == 0 {
            return Err(dg.err("n_paths", "must be >= 1"));
        }
        let grid = regular_grid(r.horizon, r.grid_step).map_err(|e| dg.err("grid_step", e))?;
        if !(r.delta > 0.0 && r.delta <= r.horizon && is_multiple(r.delta, r.grid_step)) {
            return Err(dg.err("delta", format!("must be a positive multiple of grid_step {} not exceeding the horizon", r.grid_step)));
        }
        if r.lags.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(dg.err("lags", "must be finite and >= 0"));
        }
        if r.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) || r.eps_ladder.iter().any(|e| !(*e > 0.0)) {
            return Err(dg.err("eps_ladder", "must be positive and strictly decreasing"));
        }
        if r.brownian_steps_per_unit == 0 {
            return Err(dg.err("brownian_steps_per_unit", "must be >= 1"));
        }
        let initial = match (&self.model.y0, r.burn_in) {
            (Some(_), Some(l)) if l != 0.0 => return Err(dg.err("burn_in", "cannot be combined with y0")),
            (Some(rows), _) => {
                let y0 = matrix(rows, Some(d), "y0", dg)?;
                let min = crate::kronalg::min_eigenvalue(&y0);
                if min < -PSD_CLAMP_RTOL * params.c().trace() {
                    return Err(dg.err("y0", format!("must be positive semidefinite (min eigenvalue {min:.3e})")));
                }
                InitialState::Given(y0)
            }
            (None, Some(0.0)) => InitialState::Zero,
            (None, Some(l)) if !(l > 0.0 && l.is_finite()) => return Err(dg.err("burn_in", "must be >= 0")),
            (None, Some(l)) => InitialState::BurnIn { length: Some(l) },
            (None, None) => {
                if params.lambda() >= 0.0 {
                    return Err(dg.err("burn_in", "the default burn-in needs a stable B; set burn_in explicitly"));
                }
                InitialState::BurnIn { length: None }
            }
        };
        if self.check.ks.contains(&0) {
            return Err(dg.err("ks", "moment orders must be >= 1"));
        }
        if self.check.n_mc < 2 {
            return Err(dg.err("n_mc", "must be >= 2"));
        }
        if !(self.validation.tolerance_scale.is_finite() && self.validation.tolerance_scale >= 0.0) {
            return Err(dg.err("tolerance_scale", "must be finite and >= 0"));
        }
        let sim = SimOptions { brownian_steps_per_unit: r.brownian_steps_per_unit, ..SimOptions::with_initial(initial) };
        let levy = self.levy;
        Ok(Experiment { config: self, params, levy, grid, sim, config_hash })
    }
}

impl Experiment {
    pub fn check_options(&self, seed: u64) -> CheckOptions {
        CheckOptions { mode: self.config.check.mode, ks: self.config.check.ks.clone(), n_mc: self.config.check.n_mc, seed }
    }
}
