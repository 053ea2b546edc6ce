//! Driving Lévy processes: normal variance mixtures `sqrt(eps) * N(0, I_d)`
//! either as a compound Poisson process or as an infinite-activity
//! subordinated Brownian motion truncated below a jump-size floor, plus an
//! optional isotropic Brownian part.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::kronalg::{bs_norm_vec, vec, Mat, SpectralData, Vector};
use crate::rng::{stream, Lane};

/// Law of the positive mixing variable `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum EpsilonLaw {
    Constant { value: f64 },
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl EpsilonLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            EpsilonLaw::Constant { value } => value,
            EpsilonLaw::Exponential { mean } => mean,
            EpsilonLaw::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            EpsilonLaw::Constant { value } => value * value,
            EpsilonLaw::Exponential { mean } => 2.0 * mean * mean,
            EpsilonLaw::Gamma { shape, scale } => shape * (shape + 1.0) * scale * scale,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EpsilonLaw::Constant { value } => value.is_finite() && value >= 0.0,
            EpsilonLaw::Exponential { mean } => mean.is_finite() && mean > 0.0,
            EpsilonLaw::Gamma { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid mixing law {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            EpsilonLaw::Constant { value } => value,
            EpsilonLaw::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            EpsilonLaw::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated").sample(rng),
        }
    }

    /// `(shape, scale)` of the gamma subordinator whose time-one law this is.
    fn subordinator(&self) -> Option<(f64, f64)> {
        match *self {
            EpsilonLaw::Constant { .. } => None,
            EpsilonLaw::Exponential { mean } => Some((1.0, mean)),
            EpsilonLaw::Gamma { shape, scale } => Some((shape, scale)),
        }
    }
}

/// Jump part of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    /// Rate-`rate` compound Poisson process with jumps `sqrt(eps) Z`.
    CompoundPoisson { rate: f64, epsilon: EpsilonLaw },
    /// `W_{S_t}` with `S` the gamma subordinator with `S_1 ~ epsilon`, keeping
    /// only jumps with `|x| >= floor`. A missing floor is replaced by the one
    /// discarding 0.1% of the quadratic variation.
    TruncatedTypeGTilde {
        epsilon: EpsilonLaw,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
}

/// Full description of the driving Lévy process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    pub dim: usize,
    pub jumps: JumpLaw,
    /// Variance rate of the Brownian part, which is `sigma_w * I_d`.
    #[serde(default)]
    pub sigma_w: f64,
}

/// Share of quadratic variation the default truncation floor discards.
pub const DEFAULT_DISCARDED_QV: f64 = 1e-3;

impl LevySpec {
    pub fn compound_poisson(dim: usize, rate: f64, epsilon: EpsilonLaw) -> Self {
        Self { dim, jumps: JumpLaw::CompoundPoisson { rate, epsilon }, sigma_w: 0.0 }
    }

    pub fn truncated_gtilde(dim: usize, epsilon: EpsilonLaw, floor: Option<f64>) -> Self {
        Self { dim, jumps: JumpLaw::TruncatedTypeGTilde { epsilon, floor }, sigma_w: 0.0 }
    }

    pub fn with_sigma_w(mut self, sigma_w: f64) -> Self {
        self.sigma_w = sigma_w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("Lévy dimension must be positive".into()));
        }
        if !(self.sigma_w.is_finite() && self.sigma_w >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_w must be >= 0, got {}", self.sigma_w)));
        }
        match self.jumps {
            JumpLaw::CompoundPoisson { rate, epsilon } => {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(Error::InvalidParameter(format!("jump rate must be >= 0, got {rate}")));
                }
                epsilon.validate()
            }
            JumpLaw::TruncatedTypeGTilde { epsilon, floor } => {
                epsilon.validate()?;
                if epsilon.subordinator().is_none() {
                    return Err(Error::InvalidParameter(
                        "a type G-tilde driver needs an infinitely divisible mixing law (exponential or gamma)".into(),
                    ));
                }
                match floor {
                    Some(f) if !(f.is_finite() && f > 0.0) => {
                        Err(Error::InvalidParameter(format!("truncation floor must be > 0, got {f}")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// The truncation floor actually used, if the driver is truncated.
    pub fn truncation_floor(&self) -> Option<f64> {
        match self.jumps {
            JumpLaw::CompoundPoisson { .. } => None,
            JumpLaw::TruncatedTypeGTilde { epsilon, floor } => {
                Some(floor.unwrap_or_else(|| default_floor(self.dim, epsilon)))
            }
        }
    }

    /// Same driver with the jump-size floor replaced.
    pub fn with_floor(&self, floor: f64) -> Self {
        let mut out = *self;
        if let JumpLaw::TruncatedTypeGTilde { floor: f, .. } = &mut out.jumps {
            *f = Some(floor);
        }
        out
    }

    /// `sigma_L` with `int x x^T nu_L(dx) = sigma_L I_d` for the jumps that are
    /// actually simulated.
    pub fn sigma_l(&self) -> f64 {
        match self.jumps {
            JumpLaw::CompoundPoisson { rate, epsilon } => rate * epsilon.mean(),
            JumpLaw::TruncatedTypeGTilde { epsilon, .. } => {
                let (k, theta) = epsilon.subordinator().expect("validated");
                let floor = self.truncation_floor().expect("truncated");
                k * theta * truncated_moment(self.dim, floor / theta.sqrt(), 1)
            }
        }
    }

    /// `rho_L` with `int vec(xx^T) vec(xx^T)^T nu_L(dx) = rho_L (I + K_d + vec(I) vec(I)^T)`.
    pub fn rho_l(&self) -> f64 {
        match self.jumps {
            JumpLaw::CompoundPoisson { rate, epsilon } => rate * epsilon.second_moment(),
            JumpLaw::TruncatedTypeGTilde { epsilon, .. } => {
                let (k, theta) = epsilon.subordinator().expect("validated");
                let floor = self.truncation_floor().expect("truncated");
                k * theta * theta * truncated_moment(self.dim, floor / theta.sqrt(), 2)
            }
        }
    }

    /// `sigma_L` of the untruncated driver.
    pub fn sigma_l_untruncated(&self) -> f64 {
        match self.jumps {
            JumpLaw::CompoundPoisson { .. } => self.sigma_l(),
            JumpLaw::TruncatedTypeGTilde { epsilon, .. } => epsilon.mean(),
        }
    }

    /// Draws from the (finite) jump measure for Monte Carlo integration:
    /// `int f dnu ~= mass * mean_i f(x_i)` where rejected candidates
    /// (`None`) contribute zero.
    pub fn measure_draws(&self, n: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<Option<Vector>>) {
        match self.jumps {
            JumpLaw::CompoundPoisson { rate, epsilon } => {
                let draws = (0..n).map(|_| Some(mixture_jump(self.dim, epsilon, rng))).collect();
                (rate, draws)
            }
            JumpLaw::TruncatedTypeGTilde { epsilon, .. } => {
                let env = self.envelope(epsilon);
                let draws = (0..n).map(|_| env.candidate(self.dim, rng)).collect();
                (env.rate(), draws)
            }
        }
    }

    fn envelope(&self, epsilon: EpsilonLaw) -> Envelope {
        let (k, theta) = epsilon.subordinator().expect("validated");
        let floor = self.truncation_floor().expect("truncated");
        // Subordinator jumps below s_floor essentially never clear the floor
        // after mixing: P(chi2_d >= 60 + 4d) is below 1e-12.
        let s_floor = floor * floor / (60.0 + 4.0 * self.dim as f64);
        Envelope { k, theta, u0: s_floor / theta, floor }
    }
}

fn mixture_jump(dim: usize, epsilon: EpsilonLaw, rng: &mut ChaCha8Rng) -> Vector {
    let scale = epsilon.sample(rng).sqrt();
    Vector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Thinning envelope for the gamma-subordinator Lévy density
/// `k s^{-1} e^{-s/theta}` on `s >= theta * u0`.
struct Envelope {
    k: f64,
    theta: f64,
    u0: f64,
    floor: f64,
}

impl Envelope {
    fn masses(&self) -> (f64, f64) {
        let m1 = if self.u0 < 1.0 { (1.0 / self.u0).ln() } else { 0.0 };
        let m2 = (-self.u0.max(1.0)).exp();
        (m1, m2)
    }

    fn rate(&self) -> f64 {
        let (m1, m2) = self.masses();
        self.k * (m1 + m2)
    }

    fn candidate(&self, dim: usize, rng: &mut ChaCha8Rng) -> Option<Vector> {
        let (m1, m2) = self.masses();
        let u = if rng.random::<f64>() * (m1 + m2) < m1 {
            let u = (self.u0.ln() * (1.0 - rng.random::<f64>())).exp();
            if rng.random::<f64>() >= (-u).exp() {
                return None;
            }
            u
        } else {
            let u = self.u0.max(1.0) + Exp::new(1.0).expect("rate 1").sample(rng);
            if rng.random::<f64>() >= 1.0 / u {
                return None;
            }
            u
        };
        let scale = (self.theta * u).sqrt();
        let x = Vector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        (x.norm() >= self.floor).then_some(x)
    }
}

/// `int_0^inf w^{p-1} e^{-w} P(chi2_{d+2p} >= f^2 / w) dw` for `p` in {1, 2}:
/// the share of the gamma(1)-subordinator moments surviving truncation at
/// normalised floor `f`, times `Gamma(p)`.
fn truncated_moment(dim: usize, f: f64, p: i32) -> f64 {
    let nu = (dim as f64 + 2.0 * p as f64) / 2.0;
    let integrand = |v: f64| {
        let w = v.exp();
        let tail = if f == 0.0 { 1.0 } else { gamma_ur(nu, f * f / (2.0 * w)) };
        w.powi(p) * (-w).exp() * tail
    };
    // Simpson on a log grid, w in [1e-14, 80].
    let (lo, hi) = ((1e-14f64).ln(), (80.0f64).ln());
    let n = 6000;
    let h = (hi - lo) / n as f64;
    let mut acc = integrand(lo) + integrand(hi);
    for i in 1..n {
        let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += wgt * integrand(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Smallest floor that keeps `1 - DEFAULT_DISCARDED_QV` of `sigma_L`.
fn default_floor(dim: usize, epsilon: EpsilonLaw) -> f64 {
    let (_, theta) = epsilon.subordinator().expect("validated");
    let target = 1.0 - DEFAULT_DISCARDED_QV;
    let (mut lo, mut hi) = ((1e-12f64).ln(), (10.0f64).ln());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if truncated_moment(dim, mid.exp(), 1) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.exp() * theta.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub x: Vector,
}

/// Realised jumps on `(0, horizon]`: the shared randomness of every coupled
/// simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpStream {
    pub horizon: f64,
    pub jumps: Vec<Jump>,
    pub seed: u64,
}

impl JumpStream {
    /// Builds a stream from explicit jumps; times must be strictly increasing
    /// inside `(0, horizon]`.
    pub fn from_jumps(horizon: f64, jumps: Vec<Jump>) -> Result<Self> {
        let mut prev = 0.0;
        for j in &jumps {
            if !(j.time > prev && j.time <= horizon) {
                return Err(Error::InvalidParameter(format!(
                    "jump times must increase strictly inside (0, {horizon}], got {}",
                    j.time
                )));
            }
            prev = j.time;
        }
        Ok(Self { horizon, jumps, seed: 0 })
    }

    pub fn empty(horizon: f64) -> Self {
        Self { horizon, jumps: Vec::new(), seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Keeps jumps with `|x| >= floor`.
    pub fn filter_min_norm(&self, floor: f64) -> Self {
        Self {
            horizon: self.horizon,
            jumps: self.jumps.iter().filter(|j| j.x.norm() >= floor).cloned().collect(),
            seed: self.seed,
        }
    }
}

/// Samples the jumps of `spec` on `(0, horizon]` for path 0 of `seed`.
pub fn sample_jumps(spec: &LevySpec, horizon: f64, seed: u64) -> Result<JumpStream> {
    sample_jumps_path(spec, horizon, seed, 0)
}

pub fn sample_jumps_path(spec: &LevySpec, horizon: f64, seed: u64, path: u64) -> Result<JumpStream> {
    let mut rng = stream(seed, path, Lane::Jumps);
    sample_jumps_with(spec, horizon, &mut rng).map(|mut s| {
        s.seed = seed;
        s
    })
}

/// Draws one candidate jump; `None` when thinning rejects it.
type JumpSampler = Box<dyn Fn(&mut ChaCha8Rng) -> Option<Vector>>;

pub(crate) fn sample_jumps_with(spec: &LevySpec, horizon: f64, rng: &mut ChaCha8Rng) -> Result<JumpStream> {
    spec.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let (rate, accept): (f64, JumpSampler) = match spec.jumps {
        JumpLaw::CompoundPoisson { rate, epsilon } => {
            let dim = spec.dim;
            (rate, Box::new(move |r: &mut ChaCha8Rng| Some(mixture_jump(dim, epsilon, r))))
        }
        JumpLaw::TruncatedTypeGTilde { epsilon, .. } => {
            let env = spec.envelope(epsilon);
            let rate = env.rate();
            let dim = spec.dim;
            (rate, Box::new(move |r: &mut ChaCha8Rng| env.candidate(dim, r)))
        }
    };
    let count = if rate * horizon > 0.0 {
        Poisson::new(rate * horizon).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let mut times: Vec<f64> = (0..count).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let jumps = times
        .into_iter()
        .filter_map(|time| accept(rng).map(|x| Jump { time, x }))
        .collect();
    Ok(JumpStream { horizon, jumps, seed: 0 })
}

/// Monte Carlo estimate of `E [vec[L,L]°, vec[L,L]°]_1°` with entrywise
/// standard errors, from `n_paths` independent paths on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct QuarticEstimate {
    pub mean: Mat,
    pub se: Mat,
    pub n_paths: usize,
}

pub fn empirical_quartic_matrix(spec: &LevySpec, horizon: f64, n_paths: usize, seed: u64) -> Result<QuarticEstimate> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::InsufficientData("n_paths must be >= 1".into()));
    }
    let n = spec.dim * spec.dim;
    let per_path: Vec<Mat> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<Mat> {
            let s = sample_jumps_path(spec, horizon, seed, p)?;
            let mut acc = Mat::zeros(n, n);
            for j in &s.jumps {
                let v = vec(&(&j.x * j.x.transpose()));
                acc += &v * v.transpose();
            }
            Ok(acc / horizon)
        })
        .collect::<Result<_>>()?;
    let mut mean = Mat::zeros(n, n);
    for m in &per_path {
        mean += m;
    }
    mean /= n_paths as f64;
    let mut sq = Mat::zeros(n, n);
    for m in &per_path {
        let dev = m - &mean;
        sq += dev.component_mul(&dev);
    }
    let denom = (n_paths.max(2) - 1) as f64 * n_paths as f64;
    let se = (sq / denom).map(f64::sqrt);
    Ok(QuarticEstimate { mean, se, n_paths })
}

/// Independent `N(0, sigma_w * dt * I_d)` increments over consecutive grid cells.
pub fn brownian_increments(sigma_w: f64, dim: usize, grid: &[f64], seed: u64) -> Result<Vec<Vector>> {
    if !(sigma_w.is_finite() && sigma_w >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_w must be >= 0, got {sigma_w}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let mut rng = stream(seed, 0, Lane::Brownian);
    Ok(grid
        .windows(2)
        .map(|w| {
            if sigma_w == 0.0 {
                return Vector::zeros(dim);
            }
            let sd = (sigma_w * (w[1] - w[0])).sqrt();
            let n = Normal::new(0.0, sd).expect("finite sd");
            Vector::from_fn(dim, |_, _| n.sample(&mut rng))
        })
        .collect())
}

/// Jumps of `L~_t = sum ||vec(x x^T)||_{B,S}` along the stream.
pub fn tilde_l_jumps(stream: &JumpStream, spec: &SpectralData) -> Result<Vec<(f64, f64)>> {
    stream
        .jumps
        .iter()
        .map(|j| {
            if j.x.len() != spec.dim() {
                return Err(Error::Dimension(format!("jump of length {} vs d = {}", j.x.len(), spec.dim())));
            }
            Ok((j.time, bs_norm_vec(&vec(&(&j.x * j.x.transpose())), spec)?))
        })
        .collect()
}
