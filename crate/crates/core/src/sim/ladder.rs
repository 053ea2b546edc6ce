use crate::error::{Error, Result};
use crate::kronalg::{op_norm2, Mat};
use crate::levy::{sample_jumps_path, JumpLaw, LevySpec};

use super::{simulate_with_stream, ModelParams};

/// Sup-distances of the truncated paths to the finest-floor reference.
#[derive(Debug, Clone)]
pub struct LadderReport {
    pub eps: Vec<f64>,
    pub distances: Vec<f64>,
    pub jump_counts: Vec<usize>,
}

impl LadderReport {
    /// Largest increase `d_{n+1} - d_n` along the ladder (`<= 0` when monotone).
    pub fn max_increase(&self) -> f64 {
        self.distances.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.distances.len() < 2 || self.max_increase() <= tol
    }
}

/// Drops the jumps with `|x| < eps_n` from one stream sampled at the finest
/// floor, for each `eps_n`, and compares `Y` against the unfiltered stream.
pub fn cp_approximation_ladder(
    params: &ModelParams,
    spec: &LevySpec,
    grid: &[f64],
    eps: &[f64],
    seed: u64,
    path: u64,
    y0: &Mat,
) -> Result<LadderReport> {
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) || eps[eps.len() - 1] <= 0.0 {
        return Err(Error::InvalidParameter("eps ladder must be strictly decreasing and positive".into()));
    }
    let finest = eps[eps.len() - 1];
    let sampling = match spec.jumps {
        JumpLaw::TruncatedTypeGTilde { .. } => spec.with_floor(finest),
        JumpLaw::CompoundPoisson { .. } => *spec,
    };
    let horizon = *grid.last().ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
    let full = sample_jumps_path(&sampling, horizon, seed, path)?.filter_min_norm(finest);
    let reference = simulate_with_stream(params, &full, grid, y0)?;
    let mut distances = Vec::with_capacity(eps.len());
    let mut jump_counts = Vec::with_capacity(eps.len());
    for &e in eps {
        let s = full.filter_min_norm(e);
        jump_counts.push(s.len());
        let p = simulate_with_stream(params, &s, grid, y0)?;
        let dist = p.y.iter().zip(&reference.y).map(|(a, b)| op_norm2(&(a - b))).fold(0.0, f64::max);
        distances.push(dist);
    }
    Ok(LadderReport { eps: eps.to_vec(), distances, jump_counts })
}
