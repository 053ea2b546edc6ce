//! Exact event-driven simulation of the volatility process `Y`, the
//! covariance process `V = C + Y` and the observed process `G`.
//!
//! Between events `Y` follows the closed-form flow `e^{Bt} Y e^{B^T t}`; at a
//! jump `x` it receives the rank-one update `A V^{1/2} x x^T V^{1/2} A^T` and
//! `G` moves by `V^{1/2} x`. Only the Brownian part of `G` is discretised
//! (left-point rule on a refined grid).

mod counterexample;
mod export;
mod ladder;

pub use counterexample::{counterexample, simulated_counterexample_v1, CounterexampleReport};
pub use export::{write_jumps_csv, write_path_csv};
pub use ladder::{cp_approximation_ladder, LadderReport};

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kronalg::{
    is_symmetric, matrix_exp, min_eigenvalue, op_norm2, psd_sqrt, psd_tolerance, symmetrize, KronOperators,
    spectral_abscissa, Mat, SpectralData, Vector,
};
use crate::levy::{sample_jumps_path, sample_jumps_with, Jump, JumpStream, LevySpec};
use crate::rng::{stream, Lane};

/// The parameter triple `(A, B, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    a: Mat,
    b: Mat,
    c: Mat,
}

impl ModelParams {
    /// Validated parameters; `C` must be symmetric positive definite.
    pub fn new(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let p = Self::shaped(a, b, c)?;
        let min = min_eigenvalue(&p.c);
        if min <= 1e-12 * op_norm2(&p.c) {
            return Err(Error::InvalidParameter(format!("C must be positive definite, min eigenvalue {min:.3e}")));
        }
        Ok(p)
    }

    /// Like [`ModelParams::new`] but only requires `C` positive semidefinite.
    pub fn new_degenerate(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let p = Self::shaped(a, b, c)?;
        let min = min_eigenvalue(&p.c);
        let tol = psd_tolerance(&p.c);
        if min < -tol {
            return Err(Error::NotPsd { min_eig: min, tol });
        }
        Ok(p)
    }

    fn shaped(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let d = a.nrows();
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            if m.nrows() != d || m.ncols() != d || d == 0 {
                return Err(Error::Dimension(format!("{name} is {}x{}, expected {d}x{d}", m.nrows(), m.ncols())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("model parameters"));
            }
        }
        if !is_symmetric(&c, 1e-12) {
            return Err(Error::InvalidParameter("C must be symmetric".into()));
        }
        let c = symmetrize(&c);
        Ok(Self { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn with_c(&self, c: Mat) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c)
    }

    /// `max Re sigma(B)`.
    pub fn lambda(&self) -> f64 {
        spectral_abscissa(&self.b)
    }

    pub fn spectral(&self) -> Result<SpectralData> {
        SpectralData::diagonalize(&self.b)
    }

    pub fn operators(&self, spec: &LevySpec) -> Result<KronOperators> {
        if spec.dim != self.dim() {
            return Err(Error::Dimension(format!("Lévy dimension {} vs model dimension {}", spec.dim, self.dim())));
        }
        Ok(KronOperators::build(&self.a, &self.b, spec.sigma_l(), spec.rho_l()))
    }
}

/// How `Y_0` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Zero,
    Given(Mat),
    /// Runs the process from `Y = 0` for `length` (default `10 / |lambda|`)
    /// on an independent jump stream and starts from the end state.
    BurnIn { length: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub initial: InitialState,
    pub brownian_steps_per_unit: usize,
    pub(crate) psd_guard: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { initial: InitialState::Zero, brownian_steps_per_unit: 1024, psd_guard: true }
    }
}

impl SimOptions {
    pub fn with_initial(initial: InitialState) -> Self {
        Self { initial, ..Self::default() }
    }
}

/// One jump as seen by the simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub v_pre: Mat,
    pub x: Vector,
    pub y_post: Mat,
}

/// Values of `(Y, V, G)` on the output grid plus all jump records.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: Vec<f64>,
    pub y0: Mat,
    pub y: Vec<Mat>,
    pub v: Vec<Mat>,
    pub g: Vec<Vector>,
    pub jumps: Vec<JumpRecord>,
}

/// Evenly spaced grid `0, step, ..., horizon`; `horizon` must be a multiple of `step`.
pub fn regular_grid(horizon: f64, step: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && step > 0.0 && horizon.is_finite() && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid needs horizon, step > 0 (got {horizon}, {step})")));
    }
    let n = (horizon / step).round();
    if (n * step - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is not a multiple of step {step}")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| if i == n { horizon } else { i as f64 * step }).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 {
        return Err(Error::InvalidParameter("grid must start at 0 and contain at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || !grid[grid.len() - 1].is_finite() {
        return Err(Error::InvalidParameter("grid must be strictly increasing and finite".into()));
    }
    Ok(())
}

/// `e^{B dt} Y e^{B^T dt}`.
pub fn flow_y(params: &ModelParams, y: &Mat, dt: f64) -> Result<Mat> {
    if dt < 0.0 {
        return Err(Error::InvalidParameter(format!("flow step must be >= 0, got {dt}")));
    }
    let e = matrix_exp(params.b(), dt)?;
    Ok(symmetrize(&(&e * y * e.transpose())))
}

/// `Y + A (C + Y)^{1/2} x x^T (C + Y)^{1/2} A^T`.
pub fn jump_update(y: &Mat, c: &Mat, a: &Mat, x: &Vector) -> Result<Mat> {
    let w = a * psd_sqrt(&(c + y))? * x;
    Ok(y + &w * w.transpose())
}

/// `C + e^{Bt} (V_0 - C) e^{B^T t}`; no positivity requirement on `V_0`.
pub fn deterministic_flow_v(v0: &Mat, params: &ModelParams, t: f64) -> Result<Mat> {
    if t == 0.0 {
        return Ok(v0.clone());
    }
    let e = matrix_exp(params.b(), t)?;
    Ok(params.c() + symmetrize(&(&e * (v0 - params.c()) * e.transpose())))
}

/// `e^{Bt} Y_0 e^{B^T t} + sum_i e^{B(t - s_i)} A V_{s_i-}^{1/2} x_i x_i^T V_{s_i-}^{1/2} A^T e^{B^T (t - s_i)}`.
pub fn shot_noise_eval(y0: &Mat, params: &ModelParams, records: &[JumpRecord], t: f64) -> Result<Mat> {
    let mut out = flow_y(params, y0, t)?;
    for r in records {
        if r.time > t {
            return Err(Error::InvalidParameter(format!("jump record at {} lies after t = {t}", r.time)));
        }
        let w = params.a() * psd_sqrt(&r.v_pre)? * &r.x;
        let u = matrix_exp(params.b(), t - r.time)? * w;
        out += &u * u.transpose();
    }
    Ok(out)
}

/// Caches `e^{B dt}` for repeated step sizes.
struct FlowCache<'a> {
    b: &'a Mat,
    cache: HashMap<u64, Mat>,
}

impl<'a> FlowCache<'a> {
    fn new(b: &'a Mat) -> Self {
        Self { b, cache: HashMap::new() }
    }

    fn apply(&mut self, y: &Mat, dt: f64) -> Result<Mat> {
        if dt == 0.0 {
            return Ok(y.clone());
        }
        let key = dt.to_bits();
        if !self.cache.contains_key(&key) {
            if self.cache.len() >= 512 {
                self.cache.clear();
            }
            self.cache.insert(key, matrix_exp(self.b, dt)?);
        }
        let e = &self.cache[&key];
        Ok(symmetrize(&(e * y * e.transpose())))
    }
}

pub(crate) struct BrownianDriver {
    pub sigma_w: f64,
    pub step: f64,
    pub rng: ChaCha8Rng,
}

/// Core event loop over grid points, refined Brownian steps and jumps.
pub(crate) fn run(
    params: &ModelParams,
    y0: Mat,
    grid: &[f64],
    jumps: &[Jump],
    mut brownian: Option<BrownianDriver>,
    psd_guard: bool,
) -> Result<PathSample> {
    check_grid(grid)?;
    let d = params.dim();
    if y0.nrows() != d || y0.ncols() != d {
        return Err(Error::Dimension(format!("Y0 is {}x{}, expected {d}x{d}", y0.nrows(), y0.ncols())));
    }
    if psd_guard {
        let (min, tol) = (min_eigenvalue(&y0), psd_tolerance(params.c()));
        if min < -tol {
            return Err(Error::NotPsd { min_eig: min, tol });
        }
    }
    if let Some(j) = jumps.iter().find(|j| j.x.len() != d) {
        return Err(Error::Dimension(format!("jump of length {} vs d = {d}", j.x.len())));
    }
    let c = params.c();
    let mut flow = FlowCache::new(params.b());
    let n = grid.len();
    let mut out = PathSample {
        grid: grid.to_vec(),
        y0: y0.clone(),
        y: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        jumps: Vec::new(),
    };
    let mut y = y0;
    let mut g = Vector::zeros(d);
    out.y.push(y.clone());
    out.v.push(c + &y);
    out.g.push(g.clone());

    let mut t = 0.0;
    let (mut ji, mut gi) = (0usize, 1usize);
    let mut bm_k = 1u64;
    let mut bm_last = 0.0;
    let mut sqrt_v_left = match &brownian {
        Some(_) => Some(psd_sqrt(&(c + &y))?),
        None => None,
    };
    while gi < n {
        let tj = jumps.get(ji).map_or(f64::INFINITY, |j| j.time);
        let tg = grid[gi];
        let tb = brownian.as_ref().map_or(f64::INFINITY, |b| bm_k as f64 * b.step);
        let next = tj.min(tg).min(tb);
        y = flow.apply(&y, next - t)?;
        t = next;
        if let Some(bd) = brownian.as_mut() {
            if next == tb || next == tg {
                let sd = (bd.sigma_w * (t - bm_last)).sqrt();
                let dw = Vector::from_fn(d, |_, _| sd * Distribution::<f64>::sample(&StandardNormal, &mut bd.rng));
                g += sqrt_v_left.as_ref().expect("set with driver") * dw;
                bm_last = t;
                sqrt_v_left = Some(psd_sqrt(&(c + &y))?);
                if next == tb {
                    bm_k += 1;
                }
            }
        }
        if next == tj {
            let jump = &jumps[ji];
            let v_pre = c + &y;
            let root = psd_sqrt(&v_pre)?;
            let w = params.a() * &root * &jump.x;
            y += &w * w.transpose();
            g += &root * &jump.x;
            out.jumps.push(JumpRecord { time: t, v_pre, x: jump.x.clone(), y_post: y.clone() });
            ji += 1;
            if let (Some(_), Some(s)) = (&brownian, sqrt_v_left.as_mut()) {
                // a jump exactly at a refinement point belongs to the next cell
                if bm_last == t {
                    *s = psd_sqrt(&(c + &y))?;
                }
            }
        }
        if next == tg {
            out.y.push(y.clone());
            out.v.push(c + &y);
            out.g.push(g.clone());
            gi += 1;
        }
    }
    Ok(out)
}

fn initial_state(params: &ModelParams, spec: &LevySpec, seed: u64, path: u64, initial: &InitialState) -> Result<Mat> {
    let d = params.dim();
    match initial {
        InitialState::Zero => Ok(Mat::zeros(d, d)),
        InitialState::Given(y0) => Ok(y0.clone()),
        InitialState::BurnIn { length } => {
            let length = match length {
                Some(l) if *l > 0.0 && l.is_finite() => *l,
                Some(l) => return Err(Error::InvalidParameter(format!("burn-in length must be > 0, got {l}"))),
                None => default_burn_in(params)?,
            };
            let mut rng = stream(seed, path, Lane::BurnIn);
            let jumps = sample_jumps_with(spec, length, &mut rng)?;
            let path = run(params, Mat::zeros(d, d), &[0.0, length], &jumps.jumps, None, true)?;
            Ok(path.y.last().expect("two grid points").clone())
        }
    }
}

/// `10 / |lambda|`, the default burn-in length.
pub fn default_burn_in(params: &ModelParams) -> Result<f64> {
    let lambda = params.lambda();
    if lambda >= 0.0 {
        return Err(Error::Unstable(format!("burn-in needs max Re sigma(B) < 0, got {lambda}")));
    }
    Ok(10.0 / lambda.abs())
}

/// Simulates path number `path` of `seed` on `grid`.
pub fn simulate_path_index(
    params: &ModelParams,
    spec: &LevySpec,
    grid: &[f64],
    seed: u64,
    path: u64,
    opts: &SimOptions,
) -> Result<PathSample> {
    if spec.dim != params.dim() {
        return Err(Error::Dimension(format!("Lévy dimension {} vs model dimension {}", spec.dim, params.dim())));
    }
    check_grid(grid)?;
    let y0 = initial_state(params, spec, seed, path, &opts.initial)?;
    let horizon = grid[grid.len() - 1];
    let jumps = sample_jumps_path(spec, horizon, seed, path)?;
    let brownian = brownian_driver(spec, seed, path, opts)?;
    run(params, y0, grid, &jumps.jumps, brownian, opts.psd_guard)
}

fn brownian_driver(spec: &LevySpec, seed: u64, path: u64, opts: &SimOptions) -> Result<Option<BrownianDriver>> {
    if spec.sigma_w == 0.0 {
        return Ok(None);
    }
    if opts.brownian_steps_per_unit == 0 {
        return Err(Error::InvalidParameter("brownian_steps_per_unit must be >= 1".into()));
    }
    Ok(Some(BrownianDriver {
        sigma_w: spec.sigma_w,
        step: 1.0 / opts.brownian_steps_per_unit as f64,
        rng: stream(seed, path, Lane::Brownian),
    }))
}

/// Simulates path 0 of `seed` on `grid`.
pub fn simulate_path(
    params: &ModelParams,
    spec: &LevySpec,
    grid: &[f64],
    seed: u64,
    opts: &SimOptions,
) -> Result<PathSample> {
    simulate_path_index(params, spec, grid, seed, 0, opts)
}

/// Simulates paths `0..n_paths` of `seed` in parallel; the result does not
/// depend on the thread count.
pub fn simulate_paths(
    params: &ModelParams,
    spec: &LevySpec,
    grid: &[f64],
    seed: u64,
    n_paths: usize,
    opts: &SimOptions,
) -> Result<Vec<PathSample>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_path_index(params, spec, grid, seed, p, opts))
        .collect()
}

/// Runs the model along a given jump stream, without Brownian part.
pub fn simulate_with_stream(params: &ModelParams, stream: &JumpStream, grid: &[f64], y0: &Mat) -> Result<PathSample> {
    check_grid(grid)?;
    if grid[grid.len() - 1] > stream.horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter("grid extends beyond the jump stream horizon".into()));
    }
    run(params, y0.clone(), grid, &stream.jumps, None, true)
}

/// Increments `G_{n Delta} - G_{(n-1) Delta}` for all complete periods.
pub fn aggregate_increments(path: &PathSample, delta: f64) -> Result<Vec<Vector>> {
    let horizon = path.grid[path.grid.len() - 1];
    if !(delta > 0.0 && delta <= horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("Delta must lie in (0, T], got {delta}")));
    }
    let periods = ((horizon / delta) * (1.0 + 1e-12)).floor() as usize;
    let mut idx = Vec::with_capacity(periods + 1);
    let mut gi = 0;
    for n in 0..=periods {
        let target = n as f64 * delta;
        while gi < path.grid.len() && path.grid[gi] < target - 1e-9 * delta {
            gi += 1;
        }
        if gi == path.grid.len() || (path.grid[gi] - target).abs() > 1e-9 * delta.max(target) {
            return Err(Error::InvalidParameter(format!("Delta = {delta} is not aligned with the simulation grid")));
        }
        idx.push(gi);
    }
    Ok(idx.windows(2).map(|w| &path.g[w[1]] - &path.g[w[0]]).collect())
}
