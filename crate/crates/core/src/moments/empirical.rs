use std::ops::Range;

use crate::error::{Error, Result};
use crate::kronalg::{vec, Mat, Vector};
use crate::sim::{aggregate_increments, PathSample};

/// Splits `0..len` into `n` contiguous blocks of near-equal length.
pub fn batch_ranges(len: usize, n: usize) -> Vec<Range<usize>> {
    (0..n).map(|i| (i * len / n)..((i + 1) * len / n)).collect()
}

/// Entrywise batch-means summary: mean of the per-batch estimates and its
/// standard error.
#[derive(Debug, Clone)]
pub struct BatchStat {
    pub mean: Mat,
    pub se: Mat,
    pub n_batches: usize,
}

impl BatchStat {
    pub fn from_batches(batches: &[Mat]) -> Result<Self> {
        let n = batches.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("batch means need >= 2 batches, got {n}")));
        }
        let (r, c) = batches[0].shape();
        if batches.iter().any(|b| b.shape() != (r, c)) {
            return Err(Error::Dimension("batches differ in shape".into()));
        }
        let mean = batches.iter().fold(Mat::zeros(r, c), |acc, b| acc + b) / n as f64;
        let ss = batches.iter().fold(Mat::zeros(r, c), |acc, b| {
            let d = b - &mean;
            acc + d.component_mul(&d)
        });
        let se = (ss / ((n - 1) * n) as f64).map(f64::sqrt);
        Ok(Self { mean, se, n_batches: n })
    }

    /// Entrywise `(mean - target) / se`; zero where both the difference and
    /// the standard error vanish.
    pub fn z_scores(&self, target: &Mat) -> Mat {
        Mat::from_fn(self.mean.nrows(), self.mean.ncols(), |i, j| {
            let diff = self.mean[(i, j)] - target[(i, j)];
            let se = self.se[(i, j)];
            if diff == 0.0 {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                diff / se
            }
        })
    }

    pub fn max_abs_z(&self, target: &Mat) -> f64 {
        self.z_scores(target).iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// What [`EmpiricalMoments::estimate`] computes.
#[derive(Debug, Clone)]
pub struct EmpiricalOptions {
    /// Batches per path; one long path uses 50.
    pub batches_per_path: usize,
    /// Lags of `vec Y` in grid steps.
    pub y_lags: Vec<usize>,
    /// Aggregation period for the increments.
    pub delta: f64,
    /// Lags of `G_n` and `vec(G_n G_n^T)` in periods.
    pub inc_lags: Vec<usize>,
}

impl Default for EmpiricalOptions {
    fn default() -> Self {
        Self { batches_per_path: 50, y_lags: vec![], delta: 1.0, inc_lags: vec![1, 2, 3, 4, 5] }
    }
}

/// Per-batch estimates; combine linear functionals batch by batch and
/// summarise with [`BatchStat::from_batches`].
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub n_batches: usize,
    pub grid_step: f64,
    pub mean_y: Vec<Mat>,
    pub mean_v: Vec<Mat>,
    pub var_y: Vec<Mat>,
    pub acov_y: Vec<(usize, Vec<Mat>)>,
    pub inc_mean: Vec<Mat>,
    pub inc_var: Vec<Mat>,
    pub inc_acov: Vec<(usize, Vec<Mat>)>,
    pub sq_acov: Vec<(usize, Vec<Mat>)>,
    /// `cov(vec Y_{n Delta}, vec(G_n G_n^T))`.
    pub m1: Vec<Mat>,
}

fn column(v: &Vector) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

fn global_mean(series: &[Vec<Vector>]) -> Vector {
    let n: usize = series.iter().map(Vec::len).sum();
    let dim = series[0][0].len();
    series.iter().flatten().fold(Vector::zeros(dim), |acc, v| acc + v) / n as f64
}

/// Per-batch means of the series.
fn batch_means(series: &[Vec<Vector>], per_path: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for s in series {
        for r in batch_ranges(s.len(), per_path) {
            let n = r.len() as f64;
            out.push(column(&(s[r].iter().fold(Vector::zeros(s[0].len()), |acc, v| acc + v) / n)));
        }
    }
    out
}

/// Per-batch `mean_t (x_{t+lag} - mu)(y_t - nu)^T` over `t` in the batch with
/// `t + lag` inside the path.
fn batch_cross(xs: &[Vec<Vector>], ys: &[Vec<Vector>], mu: &Vector, nu: &Vector, lag: usize, per_path: usize) -> Result<Vec<Mat>> {
    let mut out = Vec::new();
    for (x, y) in xs.iter().zip(ys) {
        for r in batch_ranges(x.len(), per_path) {
            let end = r.end.min(x.len().saturating_sub(lag));
            if end <= r.start + 1 {
                return Err(Error::InsufficientData(format!("batch too short for lag {lag}")));
            }
            let mut acc = Mat::zeros(mu.len(), nu.len());
            for t in r.start..end {
                acc += (&x[t + lag] - mu) * (&y[t] - nu).transpose();
            }
            out.push(acc / (end - r.start) as f64);
        }
    }
    Ok(out)
}

impl EmpiricalMoments {
    pub fn estimate(paths: &[PathSample], opts: &EmpiricalOptions) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InsufficientData("no paths".into()));
        }
        let per = opts.batches_per_path;
        let n_batches = per * paths.len();
        if n_batches < 2 || per == 0 {
            return Err(Error::InsufficientData("need at least two batches in total".into()));
        }
        let grid = &paths[0].grid;
        let step = grid[1] - grid[0];
        if paths.iter().any(|p| p.grid != *grid) || grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step) {
            return Err(Error::InvalidParameter("empirical moments need paths on one regular grid".into()));
        }
        let ys: Vec<Vec<Vector>> = paths.iter().map(|p| p.y.iter().map(vec).collect()).collect();
        let vs: Vec<Vec<Vector>> = paths.iter().map(|p| p.v.iter().map(vec).collect()).collect();
        let mu_y = global_mean(&ys);

        let mean_y = batch_means(&ys, per);
        let mean_v = batch_means(&vs, per);
        let var_y = batch_cross(&ys, &ys, &mu_y, &mu_y, 0, per)?;
        let acov_y = opts
            .y_lags
            .iter()
            .map(|&l| Ok((l, batch_cross(&ys, &ys, &mu_y, &mu_y, l, per)?)))
            .collect::<Result<_>>()?;

        let periods = ((opts.delta / step) + 0.5).floor() as usize;
        if periods == 0 {
            return Err(Error::InvalidParameter("Delta is shorter than the grid step".into()));
        }
        let gs: Vec<Vec<Vector>> = paths.iter().map(|p| aggregate_increments(p, opts.delta)).collect::<Result<_>>()?;
        let gg: Vec<Vec<Vector>> = gs.iter().map(|s| s.iter().map(|g| vec(&(g * g.transpose()))).collect()).collect();
        // Y at the end of each period
        let y_end: Vec<Vec<Vector>> = ys.iter().zip(&gs).map(|(y, g)| (1..=g.len()).map(|n| y[n * periods].clone()).collect()).collect();
        let mu_g = global_mean(&gs);
        let mu_gg = global_mean(&gg);
        let mu_ye = global_mean(&y_end);
        let inc_mean = batch_means(&gs, per);
        let inc_var = batch_cross(&gs, &gs, &mu_g, &mu_g, 0, per)?;
        let inc_acov = opts
            .inc_lags
            .iter()
            .map(|&l| Ok((l, batch_cross(&gs, &gs, &mu_g, &mu_g, l, per)?)))
            .collect::<Result<_>>()?;
        let sq_acov = opts
            .inc_lags
            .iter()
            .map(|&l| Ok((l, batch_cross(&gg, &gg, &mu_gg, &mu_gg, l, per)?)))
            .collect::<Result<_>>()?;
        let m1 = batch_cross(&y_end, &gg, &mu_ye, &mu_gg, 0, per)?;
        Ok(Self { n_batches, grid_step: step, mean_y, mean_v, var_y, acov_y, inc_mean, inc_var, inc_acov, sq_acov, m1 })
    }

    pub fn acov_y_at(&self, lag: usize) -> Option<&[Mat]> {
        self.acov_y.iter().find(|(l, _)| *l == lag).map(|(_, b)| b.as_slice())
    }

    pub fn inc_acov_at(&self, lag: usize) -> Option<&[Mat]> {
        self.inc_acov.iter().find(|(l, _)| *l == lag).map(|(_, b)| b.as_slice())
    }

    pub fn sq_acov_at(&self, lag: usize) -> Option<&[Mat]> {
        self.sq_acov.iter().find(|(l, _)| *l == lag).map(|(_, b)| b.as_slice())
    }
}

/// `f` applied batch by batch to aligned per-batch estimates.
pub fn combine(a: &[Mat], b: &[Mat], f: impl Fn(&Mat, &Mat) -> Mat) -> Vec<Mat> {
    a.iter().zip(b).map(|(x, y)| f(x, y)).collect()
}
