//! The acceptance experiments. Each criterion has its own fixed seed offset
//! and pinned tolerances; `tolerance_scale` multiplies the tolerances only.

use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{
    bound_process, quartic_norm_condition, stationarity_report, verify_domination, BoundParams, CheckOptions,
    SubstitutionMode, Verdict,
};
use crate::error::{Error, Result};
use crate::kronalg::{
    commutation_matrix, identity, matrix_exp, min_eigenvalue, spectral_abscissa, vec, KronOperators, Mat,
    SpectralData, Vector,
};
use crate::levy::{sample_jumps_path, tilde_l_jumps, EpsilonLaw, Jump, JumpStream, LevySpec};
use crate::moments::{
    acov_y, combine, increment_moments, stationary_mean, stationary_second_moment, stationary_var, BatchStat,
    EmpiricalMoments, EmpiricalOptions,
};
use crate::rng::{stream, Lane};
use crate::sim::{
    counterexample, cp_approximation_ladder, regular_grid, shot_noise_eval, simulate_path_index,
    simulate_paths, simulate_with_stream, simulated_counterexample_v1, InitialState, ModelParams, SimOptions,
};

pub const DEFAULT_SEED: u64 = 20_090_601;

/// Number and short name of every criterion.
pub const CRITERIA: [(u8, &str); 14] = [
    (1, "counterexample"),
    (2, "psd-invariants"),
    (3, "shot-noise"),
    (4, "domination"),
    (5, "stationary-mean"),
    (6, "acov-decay"),
    (7, "stationary-variance"),
    (8, "scalar-oracle"),
    (9, "increments"),
    (10, "squared-increments"),
    (11, "quartic-moment"),
    (12, "cp-ladder"),
    (13, "spectral-implications"),
    (14, "structural"),
];

/// Criterion number for a name or a number.
pub fn lookup(name: &str) -> Option<u8> {
    CRITERIA
        .iter()
        .find(|(id, n)| *n == name || id.to_string() == name)
        .map(|(id, _)| *id)
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub tolerance_scale: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub tolerance: String,
    pub observed: String,
    /// Seconds allowed; `None` when no runtime is prescribed.
    pub budget: Option<f64>,
    pub seconds: f64,
    pub passed: bool,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let budget = self.budget.map_or(String::new(), |b| format!(" (budget {b}s)"));
        write!(
            f,
            "[{}] {:>2} {:<22} tol: {} | observed: {} | {:.3}s{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.tolerance,
            self.observed,
            self.seconds,
            budget
        )
    }
}

struct Check {
    tolerance: String,
    observed: String,
    passed: bool,
}

/// Shared long run behind the stationary-moment criteria.
struct LongRun {
    ops: KronOperators,
    c: Mat,
    sigma_w: f64,
    delta: f64,
    emp: EmpiricalMoments,
    k1: Verdict,
    k2: Verdict,
    quartic_holds: bool,
    seconds: f64,
}

pub struct Suite {
    settings: Settings,
    long_run: OnceLock<std::result::Result<LongRun, String>>,
}

const LONG_RUN_PATHS: usize = 10;
const LONG_RUN_HORIZON: f64 = 2000.0;
const LONG_RUN_STEP: f64 = 0.0625;
const LONG_RUN_BATCHES_PER_PATH: usize = 5;
const LONG_RUN_DELTA: f64 = 0.5;
const ACOV_LAGS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const Z_MAX: f64 = 3.0;

/// Parameter set of the long run: symmetric `B`, mild `A`.
pub fn long_run_params() -> ModelParams {
    ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.05, 0.35]),
        Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -1.5]),
        Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
    )
    .expect("fixed parameters are valid")
}

pub fn long_run_levy() -> LevySpec {
    LevySpec::compound_poisson(2, 1.0, EpsilonLaw::Constant { value: 1.0 }).with_sigma_w(0.5)
}

fn params_d3() -> ModelParams {
    ModelParams::new(
        Mat::from_row_slice(3, 3, &[0.35, 0.05, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.4]),
        Mat::from_row_slice(3, 3, &[-1.2, 0.3, 0.0, 0.1, -0.9, 0.2, 0.0, 0.3, -1.4]),
        Mat::from_row_slice(3, 3, &[1.0, 0.2, 0.1, 0.2, 0.9, 0.15, 0.1, 0.15, 1.1]),
    )
    .expect("fixed parameters are valid")
}

fn column(v: &Vector) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

fn max_z_against_zero(batches: &[Mat]) -> Result<f64> {
    let s = BatchStat::from_batches(batches)?;
    Ok(s.max_abs_z(&Mat::zeros(s.mean.nrows(), s.mean.ncols())))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

impl Suite {
    pub fn new(settings: Settings) -> Self {
        Self { settings, long_run: OnceLock::new() }
    }

    fn seed(&self, id: u8) -> u64 {
        self.settings.seed.wrapping_mul(1000).wrapping_add(id as u64)
    }

    fn tol(&self, t: f64) -> f64 {
        t * self.settings.tolerance_scale
    }

    /// Runs one criterion; errors inside the experiment are reported as failures.
    pub fn run(&self, id: u8) -> Result<CriterionOutcome> {
        let name = CRITERIA
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, n)| *n)
            .ok_or_else(|| Error::Config(format!("no criterion {id}")))?;
        let start = Instant::now();
        let (check, budget, extra) = match id {
            1 => (self.counterexample(), Some(1e-3), 0.0),
            2 => (self.psd_invariants(), Some(30.0), 0.0),
            3 => (self.shot_noise(), Some(10.0), 0.0),
            4 => (self.domination(), Some(60.0), 0.0),
            5 => self.with_long_run(|s, lr| s.stationary_mean(lr), Some(120.0)),
            6 => self.with_long_run(|s, lr| s.acov_decay(lr), None),
            7 => self.with_long_run(|s, lr| s.stationary_variance(lr), Some(300.0)),
            8 => (self.scalar_oracle(), Some(1e-3), 0.0),
            9 => self.with_long_run(|s, lr| s.increments(lr), Some(120.0)),
            10 => self.with_long_run(|s, lr| s.squared_increments(lr), None),
            11 => (self.quartic_moment(), Some(5.0), 0.0),
            12 => (self.cp_ladder(), Some(30.0), 0.0),
            13 => (self.spectral_implications(), Some(30.0), 0.0),
            _ => (self.structural(), None, 0.0),
        };
        let seconds = start.elapsed().as_secs_f64() + extra;
        let check = check.unwrap_or_else(|e| Check { tolerance: "-".into(), observed: format!("error: {e}"), passed: false });
        let in_time = budget.is_none_or(|b| seconds <= b);
        Ok(CriterionOutcome {
            id,
            name,
            tolerance: check.tolerance,
            observed: check.observed,
            budget,
            seconds,
            passed: check.passed && in_time,
        })
    }

    /// Every criterion, or only `only`.
    pub fn run_all(&self, only: Option<u8>) -> Result<Vec<CriterionOutcome>> {
        CRITERIA.iter().filter(|(id, _)| only.is_none_or(|o| o == *id)).map(|(id, _)| self.run(*id)).collect()
    }

    /// The shared run is charged to the first criterion that needs it; the
    /// returned extra time is the simulation cost, so every budgeted
    /// criterion includes it.
    fn with_long_run(
        &self,
        f: impl Fn(&Self, &LongRun) -> Result<Check>,
        budget: Option<f64>,
    ) -> (Result<Check>, Option<f64>, f64) {
        let fresh = self.long_run.get().is_none();
        let lr = self.long_run.get_or_init(|| self.build_long_run().map_err(|e| e.to_string()));
        match lr {
            Ok(lr) => (f(self, lr), budget, if fresh { 0.0 } else { lr.seconds }),
            Err(e) => (Err(Error::InsufficientData(format!("long run failed: {e}"))), budget, 0.0),
        }
    }

    fn build_long_run(&self) -> Result<LongRun> {
        let start = Instant::now();
        let params = long_run_params();
        let levy = long_run_levy();
        let ops = params.operators(&levy)?;
        let report = stationarity_report(
            &params,
            &levy,
            &CheckOptions { mode: SubstitutionMode::Exact, ks: vec![1, 2], n_mc: 200_000, seed: self.seed(5) },
        )?;
        let slowest = [params.lambda(), spectral_abscissa(&ops.curly_b), spectral_abscissa(&ops.curly_c)]
            .iter()
            .map(|x| x.abs())
            .fold(f64::INFINITY, f64::min);
        let burn_in = 10.0 / slowest;
        let grid = regular_grid(LONG_RUN_HORIZON, LONG_RUN_STEP)?;
        let opts = SimOptions::with_initial(InitialState::BurnIn { length: Some(burn_in) });
        let paths = simulate_paths(&params, &levy, &grid, self.seed(5), LONG_RUN_PATHS, &opts)?;
        let steps = |h: f64| (h / LONG_RUN_STEP).round() as usize;
        let emp = EmpiricalMoments::estimate(
            &paths,
            &EmpiricalOptions {
                batches_per_path: LONG_RUN_BATCHES_PER_PATH,
                y_lags: ACOV_LAGS.iter().map(|&h| steps(h)).collect(),
                delta: LONG_RUN_DELTA,
                inc_lags: vec![1, 2, 3, 4, 5],
            },
        )?;
        Ok(LongRun {
            c: params.c().clone(),
            sigma_w: levy.sigma_w,
            delta: LONG_RUN_DELTA,
            emp,
            k1: report.k_verdict(1).unwrap_or(Verdict::Inconclusive),
            k2: report.k_verdict(2).unwrap_or(Verdict::Inconclusive),
            quartic_holds: report.quartic_norm_condition.as_ref().is_some_and(|q| q.holds),
            ops,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn counterexample(&self) -> Result<Check> {
        let tol = self.tol(1e-12);
        let r = counterexample()?;
        let q_err = (r.quadratic_form + 2.75).abs();
        let exp_err = (&r.exp_b - &r.exp_b_expected).amax();
        let sim_err = (simulated_counterexample_v1()? - &r.v1).amax();
        Ok(Check {
            tolerance: format!("|x'V1x + 11/4| <= {tol:.0e}, |e^B - expected| <= {tol:.0e}, min eig V1 < 0"),
            observed: format!(
                "x'V1x = {:.15}, err {q_err:.2e}, e^B err {exp_err:.2e}, simulator err {sim_err:.2e}, min eig {:.6}",
                r.quadratic_form, r.min_eigenvalue
            ),
            passed: q_err <= tol && exp_err <= tol && sim_err <= tol && r.min_eigenvalue < 0.0,
        })
    }

    fn psd_invariants(&self) -> Result<Check> {
        let (psd_rtol, lb_tol) = (self.tol(1e-10), self.tol(1e-8));
        let grid = regular_grid(10.0, 0.1)?;
        let mut worst_psd = f64::INFINITY;
        let mut worst_lb = f64::INFINITY;
        let cases = [
            (long_run_params(), Mat::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.3])),
            (params_d3(), identity(3) * 0.4 + Mat::from_element(3, 3, 0.1)),
        ];
        for (params, y0) in cases {
            let d = params.dim();
            let levy = LevySpec::compound_poisson(d, 2.0, EpsilonLaw::Exponential { mean: 1.0 });
            let flows: Vec<Mat> = grid.iter().map(|&t| matrix_exp(params.b(), t)).collect::<Result<_>>()?;
            let opts = SimOptions::with_initial(InitialState::Given(y0.clone()));
            let trc = params.c().trace();
            let per_path: Vec<(f64, f64)> = (0..1000u64)
                .into_par_iter()
                .map(|p| -> Result<(f64, f64)> {
                    let path = simulate_path_index(&params, &levy, &grid, self.seed(2) + d as u64, p, &opts)?;
                    let mut out = (f64::INFINITY, f64::INFINITY);
                    for (y, e) in path.y.iter().zip(&flows) {
                        out.0 = out.0.min(min_eigenvalue(y) / trc);
                        out.1 = out.1.min(min_eigenvalue(&(y - e * &y0 * e.transpose())));
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            for (a, b) in per_path {
                worst_psd = worst_psd.min(a);
                worst_lb = worst_lb.min(b);
            }
        }
        Ok(Check {
            tolerance: format!("min eig Y / tr C >= -{psd_rtol:.0e}, min eig (Y - flow Y0) >= -{lb_tol:.0e}"),
            observed: format!("{worst_psd:.3e}, {worst_lb:.3e} over 2x1000 paths"),
            passed: worst_psd >= -psd_rtol && worst_lb >= -lb_tol,
        })
    }

    fn shot_noise(&self) -> Result<Check> {
        let tol = self.tol(1e-8);
        let params = params_d3();
        let levy = LevySpec::compound_poisson(3, 10.0, EpsilonLaw::Exponential { mean: 1.0 });
        let grid = regular_grid(10.0, 0.25)?;
        let opts = SimOptions::with_initial(InitialState::Given(identity(3) * 0.5));
        let res: Vec<(f64, usize)> = (0..100u64)
            .into_par_iter()
            .map(|p| -> Result<(f64, usize)> {
                let path = simulate_path_index(&params, &levy, &grid, self.seed(3), p, &opts)?;
                let mut worst: f64 = 0.0;
                for (k, &t) in grid.iter().enumerate() {
                    let n = path.jumps.partition_point(|r| r.time <= t);
                    let shot = shot_noise_eval(&path.y0, &params, &path.jumps[..n], t)?;
                    worst = worst.max((&path.y[k] - &shot).norm() / shot.norm());
                }
                Ok((worst, path.jumps.len()))
            })
            .collect::<Result<_>>()?;
        let worst = res.iter().map(|r| r.0).fold(0.0, f64::max);
        let min_jumps = res.iter().map(|r| r.1).min().unwrap_or(0);
        Ok(Check {
            tolerance: format!("relative Frobenius error <= {tol:.0e}, >= 50 jumps per path"),
            observed: format!("{worst:.3e}, min jumps {min_jumps}"),
            passed: worst <= tol && min_jumps >= 50,
        })
    }

    fn domination(&self) -> Result<Check> {
        let tol = self.tol(1e-8);
        let grid = regular_grid(10.0, 0.1)?;
        let res: Vec<f64> = (0..1000u64)
            .into_par_iter()
            .map(|p| -> Result<f64> {
                let mut rng = stream(self.seed(4), p, Lane::Parameters);
                let d = 2 + (p % 2) as usize;
                let s = Mat::from_fn(d, d, |i, j| if i == j { 1.0 } else { rng.random_range(-0.5..0.5) });
                let eig = Mat::from_diagonal(&Vector::from_fn(d, |_, _| -rng.random_range(0.2..2.0)));
                let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Singular("random S".into()))?;
                let b = &s * eig * s_inv;
                let a = Mat::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
                let g = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                let h = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                let params = ModelParams::new(a, b, &g * g.transpose() + identity(d) * 0.5)?;
                let y0 = &h * h.transpose() * 0.5;
                let sd = SpectralData::diagonalize(params.b())?;
                let levy = LevySpec::compound_poisson(d, 2.0, EpsilonLaw::Exponential { mean: 1.0 });
                let jumps = sample_jumps_path(&levy, 10.0, self.seed(4), p)?;
                let path = simulate_with_stream(&params, &jumps, &grid, &y0)?;
                let tilde = tilde_l_jumps(&jumps, &sd)?;
                let y0_norm = crate::kronalg::bs_norm_vec(&vec(&y0), &sd)?;
                let mut worst = f64::NEG_INFINITY;
                for mode in [SubstitutionMode::Exact, SubstitutionMode::Safe] {
                    let bp = BoundParams::new(&params, &sd, mode)?;
                    let bound = bound_process(&bp, &tilde, y0_norm, &grid)?;
                    worst = worst.max(verify_domination(&path, &bound, &sd)?);
                }
                Ok(worst)
            })
            .collect::<Result<_>>()?;
        let worst = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Check {
            tolerance: format!("max(||vec Y||_BS - y) <= {tol:.0e}"),
            observed: format!("{worst:.3e} over 1000 random models, both substitution modes"),
            passed: worst <= tol,
        })
    }

    fn stationary_mean(&self, lr: &LongRun) -> Result<Check> {
        let (zmax, rtol) = (self.tol(Z_MAX), self.tol(0.05));
        let target = column(&stationary_mean(&lr.ops, &lr.c)?.mean_v);
        let stat = BatchStat::from_batches(&lr.emp.mean_v)?;
        let z = stat.max_abs_z(&target);
        let d = lr.ops.d;
        let rel = (0..d).map(|i| rel_err(stat.mean[(i * d + i, 0)], target[(i * d + i, 0)])).fold(0.0, f64::max);
        Ok(Check {
            tolerance: format!("|z| <= {zmax}, diagonal relative error <= {rtol}, k=1 SATISFIED"),
            observed: format!("max |z| {z:.2}, rel {rel:.4}, k=1 {}, {} batches", lr.k1, stat.n_batches),
            passed: z <= zmax && rel <= rtol && lr.k1 == Verdict::Satisfied,
        })
    }

    fn acov_decay(&self, lr: &LongRun) -> Result<Check> {
        let zmax = self.tol(Z_MAX);
        let mut worst: f64 = 0.0;
        for h in ACOV_LAGS {
            let lag = (h / LONG_RUN_STEP).round() as usize;
            let acov = lr.emp.acov_y_at(lag).ok_or_else(|| Error::InsufficientData(format!("lag {h}")))?;
            let e = matrix_exp(&lr.ops.curly_b, h)?;
            worst = worst.max(max_z_against_zero(&combine(acov, &lr.emp.var_y, |a, v| a - &e * v))?);
        }
        Ok(Check {
            tolerance: format!("|z| <= {zmax} for acov(h) - e^(Bh) var, h in {ACOV_LAGS:?}"),
            observed: format!("max |z| {worst:.2}"),
            passed: worst <= zmax,
        })
    }

    fn stationary_variance(&self, lr: &LongRun) -> Result<Check> {
        let zmax = self.tol(Z_MAX);
        let st = stationary_mean(&lr.ops, &lr.c)?;
        let var = stationary_var(&lr.ops, &lr.c, &st.mean_y)?;
        let z = BatchStat::from_batches(&lr.emp.var_y)?.max_abs_z(&var);
        Ok(Check {
            tolerance: format!("|z| <= {zmax}, k=2 SATISFIED, quartic norm condition"),
            observed: format!("max |z| {z:.2}, k=2 {}, quartic {}", lr.k2, lr.quartic_holds),
            passed: z <= zmax && lr.k2 == Verdict::Satisfied && lr.quartic_holds,
        })
    }

    fn increments(&self, lr: &LongRun) -> Result<Check> {
        let zmax = self.tol(Z_MAX);
        let st = stationary_mean(&lr.ops, &lr.c)?;
        let inc = increment_moments(&lr.ops, &lr.c, lr.sigma_w, lr.delta, &st.mean_v)?;
        let z_mean = max_z_against_zero(&lr.emp.inc_mean)?;
        let z_var = BatchStat::from_batches(&lr.emp.inc_var)?.max_abs_z(&inc.var);
        let mut z_acov: f64 = 0.0;
        for h in 1..=5 {
            let b = lr.emp.inc_acov_at(h).ok_or_else(|| Error::InsufficientData(format!("lag {h}")))?;
            z_acov = z_acov.max(max_z_against_zero(b)?);
        }
        Ok(Check {
            tolerance: format!("|z| <= {zmax} for mean, variance and acov(1..5)"),
            observed: format!("mean {z_mean:.2}, var {z_var:.2}, acov {z_acov:.2}"),
            passed: z_mean <= zmax && z_var <= zmax && z_acov <= zmax,
        })
    }

    fn squared_increments(&self, lr: &LongRun) -> Result<Check> {
        let zmax = self.tol(Z_MAX);
        let first = lr.emp.sq_acov_at(1).ok_or_else(|| Error::InsufficientData("lag 1".into()))?;
        let mut worst: f64 = 0.0;
        for h in 2..=5 {
            let e = matrix_exp(&lr.ops.curly_b, lr.delta * (h - 1) as f64)?;
            let b = lr.emp.sq_acov_at(h).ok_or_else(|| Error::InsufficientData(format!("lag {h}")))?;
            worst = worst.max(max_z_against_zero(&combine(b, first, |x, one| x - &e * one))?);
        }
        Ok(Check {
            tolerance: format!("|z| <= {zmax} for acov(h) - e^(B Delta (h-1)) acov(1), h = 2..5"),
            observed: format!("max |z| {worst:.2}"),
            passed: worst <= zmax,
        })
    }

    fn scalar_oracle(&self) -> Result<Check> {
        let tol = self.tol(1e-10);
        let mut worst: f64 = 0.0;
        for &(a, b, c, s, r) in &[(0.5, -1.2, 1.7, 1.3, 2.2), (0.3, -0.4, 0.6, 1.0, 1.0), (0.8, -2.5, 2.0, 0.7, 3.0)] {
            let ops = KronOperators::build(&Mat::from_element(1, 1, a), &Mat::from_element(1, 1, b), s, r);
            let cm = Mat::from_element(1, 1, c);
            // hand-derived: B1 = 2b + s a^2, C1 = 4b + 2 s a^2 + 3 r a^4
            let b1 = 2.0 * b + s * a * a;
            let c1 = 4.0 * b + 2.0 * s * a * a + 3.0 * r * a.powi(4);
            let ey = -s * a * a * c / b1;
            let ey2 = -(3.0 * r * a.powi(4) * c * c + 2.0 * (s * a * a + 3.0 * r * a.powi(4)) * c * ey) / c1;
            let var = ey2 - ey * ey;
            let h = 0.75;
            let st = stationary_mean(&ops, &cm)?;
            let m2 = stationary_second_moment(&ops, &cm, &st.mean_y)?;
            let v = stationary_var(&ops, &cm, &st.mean_y)?;
            let ac = acov_y(h, &v, &ops)?;
            for (got, want) in [
                (st.mean_y[0], ey),
                (st.mean_v[0], c + ey),
                (m2[(0, 0)], ey2),
                (v[(0, 0)], var),
                (ac[(0, 0)], (b1 * h).exp() * var),
            ] {
                worst = worst.max(rel_err(got, want));
            }
        }
        Ok(Check {
            tolerance: format!("relative error <= {tol:.0e}"),
            observed: format!("{worst:.3e} over mean, second moment, variance, acov"),
            passed: worst <= tol,
        })
    }

    fn quartic_moment(&self) -> Result<Check> {
        let zmax = self.tol(5.0);
        let levy = LevySpec::compound_poisson(2, 1.0, EpsilonLaw::Constant { value: 1.0 });
        let est = crate::levy::empirical_quartic_matrix(&levy, 1.0, 100_000, self.seed(11))?;
        let vi = vec(&identity(2));
        let target = identity(4) + commutation_matrix(2) + &vi * vi.transpose();
        let stat = BatchStat { mean: est.mean, se: est.se, n_batches: est.n_paths };
        let z = stat.max_abs_z(&target);
        Ok(Check {
            tolerance: format!("|z| <= {zmax} entrywise"),
            observed: format!("max |z| {z:.2} over {} unit-time paths", est.n_paths),
            passed: z <= zmax,
        })
    }

    fn cp_ladder(&self) -> Result<Check> {
        let rtol = self.tol(1e-10);
        let params = long_run_params();
        let levy = LevySpec::truncated_gtilde(2, EpsilonLaw::Exponential { mean: 1.0 }, None);
        let eps: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
        let grid = regular_grid(5.0, 0.05)?;
        let y0 = Mat::zeros(2, 2);
        let res: Vec<(f64, f64)> = (0..100u64)
            .into_par_iter()
            .map(|p| -> Result<(f64, f64)> {
                let r = cp_approximation_ladder(&params, &levy, &grid, &eps, self.seed(12), p, &y0)?;
                let scale = 1.0 + r.distances.iter().copied().fold(0.0, f64::max);
                Ok((r.max_increase() / scale, r.distances[0]))
            })
            .collect::<Result<_>>()?;
        let worst = res.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let moved = res.iter().filter(|r| r.1 > 0.0).count();
        Ok(Check {
            tolerance: format!("max increase <= {rtol:.0e} x (1 + max distance)"),
            observed: format!("{worst:.3e}, {moved}/100 paths with a positive coarsest distance"),
            passed: worst <= rtol,
        })
    }

    fn spectral_implications(&self) -> Result<Check> {
        let mut k1_sat = 0;
        let mut k2_sat = 0;
        let mut failures = Vec::new();
        for p in 0..50u64 {
            let mut rng = stream(self.seed(13), p, Lane::Parameters);
            let d = 2;
            let s = Mat::from_fn(d, d, |i, j| if i == j { 1.0 } else { rng.random_range(-0.3..0.3) });
            let eig = Mat::from_diagonal(&Vector::from_fn(d, |_, _| -rng.random_range(0.1..1.5)));
            let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Singular("random S".into()))?;
            let a = Mat::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
            let params = ModelParams::new(a, &s * eig * s_inv, identity(d))?;
            let levy = LevySpec::compound_poisson(d, rng.random_range(0.1..2.0), EpsilonLaw::Exponential { mean: 1.0 });
            let report = stationarity_report(
                &params,
                &levy,
                &CheckOptions { mode: SubstitutionMode::Exact, ks: vec![1, 2], n_mc: 20_000, seed: self.seed(13) + p },
            )?;
            let sp = &report.spectral;
            if report.k_verdict(1) == Some(Verdict::Satisfied) {
                k1_sat += 1;
                if !(sp.max_re_curly_b < 0.0) {
                    failures.push(format!("set {p}: k=1 but curly_b abscissa {:.3e}", sp.max_re_curly_b));
                }
            }
            let quartic = report.quartic_norm_condition.as_ref().is_some_and(|q| q.holds);
            if report.k_verdict(2) == Some(Verdict::Satisfied) && quartic {
                k2_sat += 1;
                if !(sp.max_re_curly_c < 0.0) {
                    failures.push(format!("set {p}: k=2 but curly_c abscissa {:.3e}", sp.max_re_curly_c));
                }
            }
        }
        Ok(Check {
            tolerance: "every premise set has a negative abscissa; both premises occur".into(),
            observed: format!("k=1 sets {k1_sat}, k=2 + quartic sets {k2_sat}, violations {}", failures.len()),
            passed: failures.is_empty() && k1_sat > 0 && k2_sat > 0,
        })
    }

    fn structural(&self) -> Result<Check> {
        let ray_tol = self.tol(1e-10);
        let grid = regular_grid(10.0, 0.1)?;

        // scaling: V / c at C = c I equals the path at C = I, with c a power of two
        let c = 4.0;
        let a = Mat::from_row_slice(2, 2, &[0.4, 0.1, -0.2, 0.3]);
        let b = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -0.7]);
        let levy = LevySpec::compound_poisson(2, 2.0, EpsilonLaw::Exponential { mean: 1.0 });
        let jumps = sample_jumps_path(&levy, 10.0, self.seed(14), 0)?;
        let z0 = Mat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let unit = simulate_with_stream(&ModelParams::new(a.clone(), b.clone(), identity(2))?, &jumps, &grid, &z0)?;
        let scaled = simulate_with_stream(&ModelParams::new(a, b, identity(2) * c)?, &jumps, &grid, &(&z0 * c))?;
        let scale_err = unit.v.iter().zip(&scaled.v).map(|(z, v)| (v / c - z).amax()).fold(0.0, f64::max);

        // diagonal decoupling with one coordinate jumping at a time
        let mut rng = stream(self.seed(14), 1, Lane::Jumps);
        let mut t = 0.0;
        let mut one_coord = Vec::new();
        loop {
            t += rng.random_range(0.05..0.5);
            if t > 10.0 {
                break;
            }
            let mut x = Vector::zeros(3);
            x[rng.random_range(0..3)] = rng.random_range(-2.0..2.0);
            one_coord.push(Jump { time: t, x });
        }
        let diag = ModelParams::new(
            Mat::from_diagonal(&Vector::from_vec(vec![0.5, 0.3, 0.7])),
            Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -0.6, -1.4])),
            Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.5, 2.0])),
        )?;
        let stream_d = JumpStream::from_jumps(10.0, one_coord)?;
        let y0d = Mat::from_diagonal(&Vector::from_vec(vec![0.2, 0.4, 0.1]));
        let pd = simulate_with_stream(&diag, &stream_d, &grid, &y0d)?;
        let off_diag = pd
            .y
            .iter()
            .chain(pd.jumps.iter().map(|r| &r.y_post))
            .map(|y| Mat::from_fn(3, 3, |i, j| if i == j { 0.0 } else { y[(i, j)] }).amax())
            .fold(0.0, f64::max);

        // degenerate C: Y stays on the ray through C
        let cd = Mat::from_element(2, 2, 1.0);
        let ray = ModelParams::new_degenerate(identity(2) * 0.6, identity(2) * -0.8, cd.clone())?;
        let jr = sample_jumps_path(&LevySpec::compound_poisson(2, 3.0, EpsilonLaw::Exponential { mean: 1.0 }), 10.0, self.seed(14), 2)?;
        let pr = simulate_with_stream(&ray, &jr, &grid, &(&cd * 0.7))?;
        let ray_err = pr
            .y
            .iter()
            .map(|y| (y - &cd * (y.trace() / 2.0)).amax() / (1.0 + y.amax()))
            .fold(0.0, f64::max);

        // quartic norm condition at d = 1: both sides are 3
        let one = KronOperators::build(&Mat::from_element(1, 1, 0.5), &Mat::from_element(1, 1, -1.0), 1.0, 1.0);
        let q = quartic_norm_condition(&one, &SpectralData::diagonalize(&Mat::from_element(1, 1, -1.0))?, 1.0)?;

        Ok(Check {
            tolerance: format!("scaling exact, off-diagonals exactly 0, ray <= {ray_tol:.0e}, both sides 3 exactly"),
            observed: format!(
                "scaling {scale_err:.1e} ({} jumps), off-diagonal {off_diag:.1e} ({} jumps), ray {ray_err:.1e}, sides {} / {}",
                jumps.len(),
                pd.jumps.len(),
                q.lhs,
                q.rhs
            ),
            passed: scale_err == 0.0 && off_diag == 0.0 && ray_err <= ray_tol && q.lhs == 3.0 && q.rhs == 3.0,
        })
    }
}
