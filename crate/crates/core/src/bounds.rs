//! Univariate domination of `||vec(Y_t)||_{B,S}` and numerical checks of the
//! moment and spectral conditions for stationarity.

use std::fmt::Write as _;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kronalg::{
    bs_norm_mat, bs_norm_vec, k2b, kron, kron4, op_norm2, op_norm2_c, spectral_abscissa, to_complex, vec, K2bMode,
    KronOperators,
    Mat, SpectralData, Vector,
};
use crate::levy::{JumpLaw, LevySpec};
use crate::rng::{stream, Lane};
use crate::sim::{ModelParams, PathSample};

/// Which constants enter the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstitutionMode {
    /// `K_{2,B}` by search and `||A (x) A||_{B,S}`.
    Exact,
    /// `||S||_2^2` for `K_{2,B}` and `||A||_2^2` for `||A (x) A||_{B,S}`.
    Safe,
}

/// Constants of the dominating univariate process
/// `dy = 2 lambda y dt + alpha1 (c_level + y_-) dL~`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundParams {
    pub lambda: f64,
    pub alpha1: f64,
    pub c_level: f64,
    pub k2b: f64,
    pub a_norm: f64,
    pub mode: SubstitutionMode,
}

impl BoundParams {
    pub fn new(params: &ModelParams, spec: &SpectralData, mode: SubstitutionMode) -> Result<Self> {
        Self::with_k2b_mode(params, spec, mode, K2bMode::default())
    }

    pub fn with_k2b_mode(params: &ModelParams, spec: &SpectralData, mode: SubstitutionMode, k_mode: K2bMode) -> Result<Self> {
        if spec.dim() != params.dim() {
            return Err(Error::Dimension("spectral data and model differ in dimension".into()));
        }
        let (k, a_norm) = match mode {
            SubstitutionMode::Exact => {
                let a_kron = kron(params.a(), params.a());
                (k2b(spec, k_mode), bs_norm_mat(&a_kron, spec)?)
            }
            SubstitutionMode::Safe => (k2b(spec, K2bMode::UpperBound), op_norm2(params.a()).powi(2)),
        };
        let conj = spec.s_norm().powi(2) * spec.s_inv_norm().powi(2);
        Ok(Self {
            lambda: spec.lambda,
            alpha1: conj * k * a_norm,
            c_level: op_norm2(params.c()) / k,
            k2b: k,
            a_norm,
            mode,
        })
    }
}

/// `||vec(x x^T)||_{B,S} = ||S^{-1} x||_2^2`.
pub fn rank_one_bs_norm(x: &Vector, spec: &SpectralData) -> f64 {
    let xc = x.map(|v| Complex::new(v, 0.0));
    (&spec.s_inv * xc).norm_squared()
}

/// Values of the dominating process on the grid and just after each jump.
#[derive(Debug, Clone)]
pub struct BoundPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub at_jumps: Vec<f64>,
}

/// Runs the dominating process along `tilde_jumps = (s_i, dL~_i)`.
pub fn bound_process(bp: &BoundParams, tilde_jumps: &[(f64, f64)], y0: f64, grid: &[f64]) -> Result<BoundPath> {
    if grid.is_empty() || grid[0] != 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must start at 0 and increase strictly".into()));
    }
    let horizon = grid[grid.len() - 1];
    if tilde_jumps.windows(2).any(|w| !(w[1].0 > w[0].0))
        || tilde_jumps.iter().any(|&(t, l)| !(t > 0.0 && t <= horizon) || !(l >= 0.0))
    {
        return Err(Error::InvalidParameter("tilde jumps must be increasing in (0, T] with nonnegative sizes".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut at_jumps = Vec::with_capacity(tilde_jumps.len());
    let (mut y, mut t, mut ji) = (y0, 0.0, 0usize);
    values.push(y);
    for &tg in &grid[1..] {
        while ji < tilde_jumps.len() && tilde_jumps[ji].0 <= tg {
            let (s, l) = tilde_jumps[ji];
            y *= (2.0 * bp.lambda * (s - t)).exp();
            y += bp.alpha1 * (bp.c_level + y) * l;
            at_jumps.push(y);
            t = s;
            ji += 1;
        }
        y *= (2.0 * bp.lambda * (tg - t)).exp();
        t = tg;
        values.push(y);
    }
    Ok(BoundPath { grid: grid.to_vec(), values, at_jumps })
}

/// `max (||vec(Y_t)||_{B,S} - y_t)` over grid points and post-jump states.
pub fn verify_domination(path: &PathSample, bound: &BoundPath, spec: &SpectralData) -> Result<f64> {
    if path.grid.len() != bound.values.len() || path.grid.iter().zip(&bound.grid).any(|(a, b)| a != b) {
        return Err(Error::InvalidParameter("matrix and bound paths use different grids".into()));
    }
    if path.jumps.len() != bound.at_jumps.len() {
        return Err(Error::InvalidParameter(format!(
            "{} matrix jumps vs {} bound jumps",
            path.jumps.len(),
            bound.at_jumps.len()
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    for (y, b) in path.y.iter().zip(&bound.values) {
        worst = worst.max(bs_norm_vec(&vec(y), spec)? - b);
    }
    for (r, b) in path.jumps.iter().zip(&bound.at_jumps) {
        worst = worst.max(bs_norm_vec(&vec(&r.y_post), spec)? - b);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    /// Three-standard-error rule for `lhs < threshold`.
    pub fn from_estimate(lhs: f64, se: f64, threshold: f64) -> Self {
        if lhs + 3.0 * se < threshold {
            Verdict::Satisfied
        } else if lhs - 3.0 * se > threshold {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "SATISFIED",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Monte Carlo estimate of a Lévy-measure integral against a threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionFragment {
    pub k: u32,
    pub lhs: f64,
    pub se: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Verdict upgraded from a larger `k` (or downgraded from a smaller one).
    pub implied: bool,
    /// Integral taken over a truncated Lévy measure.
    pub truncated: bool,
}

/// Default number of Monte Carlo draws for the condition integrals.
pub const DEFAULT_N_MC: usize = 1_000_000;

const MC_CHUNKS: usize = 32;

/// `(mass, per-draw values of ||vec(x x^T)||_{B,S})`, zero for rejected draws.
fn jump_norm_draws(spec: &LevySpec, sd: &SpectralData, n_mc: usize, seed: u64) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    if n_mc < 2 {
        return Err(Error::InsufficientData("need at least two Monte Carlo draws".into()));
    }
    if spec.dim != sd.dim() {
        return Err(Error::Dimension("Lévy dimension differs from B".into()));
    }
    let per = n_mc.div_ceil(MC_CHUNKS);
    let chunks: Vec<(f64, Vec<f64>)> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = per.min(n_mc.saturating_sub(c * per));
            let mut rng = stream(seed, c as u64, Lane::MonteCarlo);
            let (mass, draws) = spec.measure_draws(n, &mut rng);
            (mass, draws.into_iter().map(|x| x.map_or(0.0, |x| rank_one_bs_norm(&x, sd))).collect())
        })
        .collect();
    let mass = chunks.first().map_or(0.0, |c| c.0);
    Ok((mass, chunks.into_iter().flat_map(|c| c.1).collect()))
}

fn mean_se(mass: f64, vals: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = vals.clone().count() as f64;
    let mean = vals.clone().sum::<f64>() / n;
    let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mass * mean, mass * (var / n).sqrt())
}

fn is_truncated(spec: &LevySpec) -> bool {
    matches!(spec.jumps, JumpLaw::TruncatedTypeGTilde { .. })
}

/// `int log(1 + alpha1 ||vec(x x^T)||_{B,S}) nu_L(dx) < -2 lambda`.
pub fn log_moment_condition(
    bp: &BoundParams,
    spec: &LevySpec,
    sd: &SpectralData,
    n_mc: usize,
    seed: u64,
) -> Result<ConditionFragment> {
    let (mass, norms) = jump_norm_draws(spec, sd, n_mc, seed)?;
    let (lhs, se) = mean_se(mass, norms.iter().map(|u| (bp.alpha1 * u).ln_1p()));
    let threshold = -2.0 * bp.lambda;
    Ok(ConditionFragment {
        k: 0,
        lhs,
        se,
        threshold,
        verdict: Verdict::from_estimate(lhs, se, threshold),
        implied: false,
        truncated: is_truncated(spec),
    })
}

/// `int ((1 + alpha1 ||vec(x x^T)||_{B,S})^k - 1) nu_L(dx) < -2 lambda k` for
/// each `k`, on common draws. A SATISFIED verdict propagates to all smaller
/// `k` and a VIOLATED verdict to all larger `k`.
pub fn k_moment_conditions(
    bp: &BoundParams,
    spec: &LevySpec,
    sd: &SpectralData,
    ks: &[u32],
    n_mc: usize,
    seed: u64,
) -> Result<Vec<ConditionFragment>> {
    if ks.contains(&0) {
        return Err(Error::InvalidParameter("moment order k must be >= 1".into()));
    }
    let (mass, norms) = jump_norm_draws(spec, sd, n_mc, seed)?;
    let truncated = is_truncated(spec);
    let mut out: Vec<ConditionFragment> = ks
        .iter()
        .map(|&k| {
            let (lhs, se) = mean_se(mass, norms.iter().map(|u| (bp.alpha1 * u).ln_1p() * k as f64).map(f64::exp_m1));
            let threshold = -2.0 * bp.lambda * k as f64;
            ConditionFragment {
                k,
                lhs,
                se,
                threshold,
                verdict: Verdict::from_estimate(lhs, se, threshold),
                implied: false,
                truncated,
            }
        })
        .collect();
    let snapshot: Vec<(u32, Verdict)> = out.iter().map(|f| (f.k, f.verdict)).collect();
    for f in out.iter_mut() {
        if f.verdict != Verdict::Satisfied && snapshot.iter().any(|&(k, v)| k > f.k && v == Verdict::Satisfied) {
            f.verdict = Verdict::Satisfied;
            f.implied = true;
        } else if f.verdict != Verdict::Violated && snapshot.iter().any(|&(k, v)| k < f.k && v == Verdict::Violated) {
            f.verdict = Verdict::Violated;
            f.implied = true;
        }
    }
    Ok(out)
}

pub fn k_moment_condition(
    bp: &BoundParams,
    spec: &LevySpec,
    sd: &SpectralData,
    k: u32,
    n_mc: usize,
    seed: u64,
) -> Result<ConditionFragment> {
    Ok(k_moment_conditions(bp, spec, sd, &[k], n_mc, seed)?.remove(0))
}

/// Spectral abscissae of `B`, `curly_b`, `curly_c` and their invertibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralFragment {
    pub max_re_b: f64,
    pub max_re_curly_b: f64,
    pub max_re_curly_c: f64,
    pub curly_b_min_sv: f64,
    pub curly_c_min_sv: f64,
    pub curly_b_invertible: bool,
    pub curly_c_invertible: bool,
}

impl SpectralFragment {
    pub fn all_stable(&self) -> bool {
        self.max_re_b < 0.0 && self.max_re_curly_b < 0.0 && self.max_re_curly_c < 0.0
    }
}

fn invertibility(m: &Mat) -> (f64, bool) {
    let sv = m.singular_values();
    let (min, max) = (sv.min(), sv.max());
    (min, min > m.nrows() as f64 * f64::EPSILON * max)
}

pub fn spectral_check(b: &Mat, ops: &KronOperators) -> SpectralFragment {
    let (curly_b_min_sv, curly_b_invertible) = invertibility(&ops.curly_b);
    let (curly_c_min_sv, curly_c_invertible) = invertibility(&ops.curly_c);
    SpectralFragment {
        max_re_b: spectral_abscissa(b),
        max_re_curly_b: spectral_abscissa(&ops.curly_b),
        max_re_curly_c: spectral_abscissa(&ops.curly_c),
        curly_b_min_sv,
        curly_c_min_sv,
        curly_b_invertible,
        curly_c_invertible,
    }
}

/// Both sides of
/// `||Q + K Q + I||_{B~,S~} <= K_{2,B}^2 ||vec(I + K_d + vec(I) vec(I)^T)||_{B~,S~}`
/// with `S~ = S (x) S (x) S (x) S`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuarticNormFragment {
    pub lhs: f64,
    pub rhs: f64,
    pub k2b: f64,
    pub holds: bool,
}

pub fn quartic_norm_condition(ops: &KronOperators, sd: &SpectralData, k2b: f64) -> Result<QuarticNormFragment> {
    if sd.dim() != ops.d {
        return Err(Error::Dimension("spectral data and operators differ in dimension".into()));
    }
    let n4 = ops.curly_q.nrows();
    let (s4_inv, s4) = kron4(sd);
    let op = &ops.curly_q + &ops.curly_k * &ops.curly_q + Mat::identity(n4, n4);
    let lhs = op_norm2_c(&(&s4_inv * to_complex(&op) * &s4));
    let pattern = vec(&ops.quartic_normal_pattern());
    let rhs = k2b * k2b * (&s4_inv * to_complex(&Mat::from_column_slice(n4, 1, pattern.as_slice()))).norm();
    // rounding-level ties (unitary d = 1 gives 3 = 3) count as holding
    let holds = lhs <= rhs * (1.0 + 1e-12);
    Ok(QuarticNormFragment { lhs, rhs, k2b, holds })
}

/// What to compute in a [`StationarityReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOptions {
    pub mode: SubstitutionMode,
    pub ks: Vec<u32>,
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { mode: SubstitutionMode::Exact, ks: vec![1, 2], n_mc: DEFAULT_N_MC, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityReport {
    pub bound: Option<BoundParams>,
    pub log_moment: Option<ConditionFragment>,
    pub k_moments: Vec<ConditionFragment>,
    pub spectral: SpectralFragment,
    pub quartic_norm_condition: Option<QuarticNormFragment>,
    pub notes: Vec<String>,
}

impl StationarityReport {
    pub fn k_verdict(&self, k: u32) -> Option<Verdict> {
        self.k_moments.iter().find(|f| f.k == k).map(|f| f.verdict)
    }

    /// Flat `key = value` listing.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        if let Some(b) = &self.bound {
            let _ = writeln!(s, "mode = {:?}", b.mode);
            let _ = writeln!(s, "lambda = {:.12e}", b.lambda);
            let _ = writeln!(s, "threshold = {:.12e}", -2.0 * b.lambda);
            let _ = writeln!(s, "alpha1 = {:.12e}", b.alpha1);
            let _ = writeln!(s, "k2b = {:.12e}", b.k2b);
            let _ = writeln!(s, "c_level = {:.12e}", b.c_level);
        }
        if let Some(f) = &self.log_moment {
            let _ = writeln!(s, "log_moment.lhs = {:.12e}", f.lhs);
            let _ = writeln!(s, "log_moment.se = {:.12e}", f.se);
            let _ = writeln!(s, "log_moment.verdict = {}", f.verdict);
        }
        for f in &self.k_moments {
            let _ = writeln!(s, "k{}.lhs = {:.12e}", f.k, f.lhs);
            let _ = writeln!(s, "k{}.se = {:.12e}", f.k, f.se);
            let _ = writeln!(s, "k{}.threshold = {:.12e}", f.k, f.threshold);
            let _ = writeln!(s, "k{}.verdict = {}", f.k, f.verdict);
        }
        let sp = &self.spectral;
        let _ = writeln!(s, "spectral.max_re_b = {:.12e}", sp.max_re_b);
        let _ = writeln!(s, "spectral.max_re_curly_b = {:.12e}", sp.max_re_curly_b);
        let _ = writeln!(s, "spectral.max_re_curly_c = {:.12e}", sp.max_re_curly_c);
        let _ = writeln!(s, "spectral.curly_b_invertible = {}", sp.curly_b_invertible);
        let _ = writeln!(s, "spectral.curly_c_invertible = {}", sp.curly_c_invertible);
        if let Some(q) = &self.quartic_norm_condition {
            let _ = writeln!(s, "quartic_norm.lhs = {:.12e}", q.lhs);
            let _ = writeln!(s, "quartic_norm.rhs = {:.12e}", q.rhs);
            let _ = writeln!(s, "quartic_norm.holds = {}", q.holds);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note = {n}");
        }
        s
    }
}

/// Runs every check; the bound-dependent ones are skipped with a note when
/// `B` is not diagonalizable.
pub fn stationarity_report(params: &ModelParams, spec: &LevySpec, opts: &CheckOptions) -> Result<StationarityReport> {
    let ops = params.operators(spec)?;
    let spectral = spectral_check(params.b(), &ops);
    let mut notes = Vec::new();
    if is_truncated(spec) {
        notes.push("integrals use the truncated Lévy measure; the untruncated verdict may differ".into());
    }
    let sd = match params.spectral() {
        Ok(sd) => sd,
        Err(e @ Error::NonDiagonalizable { .. }) => {
            notes.push(format!("bound-dependent checks skipped: {e}"));
            return Ok(StationarityReport { bound: None, log_moment: None, k_moments: vec![], spectral, quartic_norm_condition: None, notes });
        }
        Err(e) => return Err(e),
    };
    let bp = BoundParams::new(params, &sd, opts.mode)?;
    let log_moment = log_moment_condition(&bp, spec, &sd, opts.n_mc, opts.seed)?;
    let k_moments = if opts.ks.is_empty() { vec![] } else { k_moment_conditions(&bp, spec, &sd, &opts.ks, opts.n_mc, opts.seed)? };
    let q = quartic_norm_condition(&ops, &sd, bp.k2b)?;
    Ok(StationarityReport { bound: Some(bp), log_moment: Some(log_moment), k_moments, spectral, quartic_norm_condition: Some(q), notes })
}

#[cfg(test)]
mod tests;
