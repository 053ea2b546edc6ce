//! Closed-form first and second order moments of `Y`, `V` and of the
//! increments `G_n`, and batch-means estimators for their empirical
//! counterparts.

mod empirical;

pub use empirical::{
    batch_ranges, combine, BatchStat, EmpiricalMoments, EmpiricalOptions,
};

use nalgebra::linalg::LU;
use nalgebra::Dyn;

use crate::error::{Error, Result};
use crate::kronalg::{identity, kron, matrix_exp, min_eigenvalue, op_norm2, spectral_abscissa, symmetrize, unvec, vec, KronOperators, Mat, Vector};

/// Generators whose smallest singular value falls below this fraction of the
/// largest are treated as singular.
pub const SINGULAR_RTOL: f64 = 1e-10;

/// LU factorisation of a generator that passed the singularity test.
struct Solver {
    m: Mat,
    lu: LU<f64, Dyn, Dyn>,
}

impl Solver {
    fn new(m: &Mat, name: &str) -> Result<Self> {
        let sv = m.singular_values();
        let (min, max) = (sv.min(), sv.max());
        if !(min > SINGULAR_RTOL * max) {
            return Err(Error::Singular(format!("{name}: min singular value {min:.3e} vs norm {max:.3e}")));
        }
        Ok(Self { m: m.clone(), lu: m.clone().lu() })
    }

    /// LU solve with one step of iterative refinement.
    fn solve(&self, rhs: &Vector) -> Vector {
        let mut x = self.lu.solve(rhs).expect("nonsingular by construction");
        let r = rhs - &self.m * &x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        x
    }

    fn solve_mat(&self, rhs: &Mat) -> Mat {
        let cols: Vec<Vector> = rhs.column_iter().map(|c| self.solve(&c.into_owned())).collect();
        Mat::from_columns(&cols)
    }
}

fn check_c(ops: &KronOperators, c: &Mat) -> Result<Vector> {
    if c.nrows() != ops.d || c.ncols() != ops.d {
        return Err(Error::Dimension(format!("C is {}x{}, expected {d}x{d}", c.nrows(), c.ncols(), d = ops.d)));
    }
    Ok(vec(c))
}

fn check_len(v: &Vector, n: usize, name: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("{name} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// `E vec(Y_t)` from `E vec(Y_0)`; closed form when `curly_b` is invertible,
/// otherwise the exact integral through an augmented exponential.
pub fn mean_y_t(y0_mean: &Vector, ops: &KronOperators, c: &Mat, t: f64) -> Result<Vector> {
    let vc = check_c(ops, c)?;
    let n = ops.d * ops.d;
    check_len(y0_mean, n, "E vec(Y_0)")?;
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(y0_mean.clone());
    }
    let forcing = &ops.a_kron * &vc * ops.sigma_l;
    match Solver::new(&ops.curly_b, "curly_b") {
        Ok(s) => {
            let shift = s.solve(&forcing);
            Ok(matrix_exp(&ops.curly_b, t)? * (y0_mean + &shift) - shift)
        }
        Err(_) => {
            let mut g = Mat::zeros(n + 1, n + 1);
            g.view_mut((0, 0), (n, n)).copy_from(&ops.curly_b);
            g.view_mut((0, n), (n, 1)).copy_from(&forcing);
            let mut z = Vector::zeros(n + 1);
            z.rows_mut(0, n).copy_from(y0_mean);
            z[n] = 1.0;
            Ok((matrix_exp(&g, t)? * z).rows(0, n).into_owned())
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryMean {
    pub mean_y: Vector,
    pub mean_v: Vector,
    /// `||B E Y + E Y B^T + sigma_L A E Y A^T + sigma_L A C A^T||_2`.
    pub sylvester_residual: f64,
    /// `||E vec V - E vec Y - vec C||_2`.
    pub consistency: f64,
}

/// `E vec Y = -sigma_L curly_b^{-1} (A (x) A) vec C` and
/// `E vec V = curly_b^{-1} (B (+) B) vec C`.
pub fn stationary_mean(ops: &KronOperators, c: &Mat) -> Result<StationaryMean> {
    let vc = check_c(ops, c)?;
    let s = Solver::new(&ops.curly_b, "curly_b")?;
    let mean_y = -s.solve(&(&ops.a_kron * &vc)) * ops.sigma_l;
    let mean_v = s.solve(&(&ops.b_sum * &vc));
    let ey = unvec(&mean_y)?;
    let (a, b) = (&ops.a, &ops.b);
    let sylvester = b * &ey + &ey * b.transpose() + (a * &ey * a.transpose() + a * c * a.transpose()) * ops.sigma_l;
    let consistency = (&mean_v - &mean_y - &vc).norm();
    let scale = 1.0 + vc.norm() + mean_y.norm();
    let sylvester_residual = op_norm2(&sylvester);
    if sylvester_residual > 1e-8 * scale * (1.0 + op_norm2(b)) || consistency > 1e-8 * scale {
        return Err(Error::Singular(format!(
            "stationary mean ill-conditioned (Sylvester residual {sylvester_residual:.3e}, consistency {consistency:.3e})"
        )));
    }
    Ok(StationaryMean { mean_y, mean_v, sylvester_residual, consistency })
}

/// `acov(h) = e^{curly_b h} var0`, with `acov(-h) = acov(h)^T`.
pub fn acov_y(h: f64, var0: &Mat, ops: &KronOperators) -> Result<Mat> {
    let n = ops.d * ops.d;
    if var0.nrows() != n || var0.ncols() != n {
        return Err(Error::Dimension(format!("variance must be {n}x{n}")));
    }
    let out = matrix_exp(&ops.curly_b, h.abs())? * var0;
    Ok(if h < 0.0 { out.transpose() } else { out })
}

/// `(c (x) I) m = c (x) m` and `(I (x) c) m = m (x) c` as matrices acting on `m`.
fn kron_with_c(vc: &Vector, n: usize) -> (Mat, Mat) {
    let cm = Mat::from_column_slice(vc.len(), 1, vc.as_slice());
    (kron(&cm, &identity(n)), kron(&identity(n), &cm))
}

/// Forcing blocks of the second-moment equation:
/// `(F_cm, F_mc, f_cc)` with
/// `du/dt = curly_c u + F_cm (c (x) m) + F_mc (m (x) c) + f_cc`.
fn second_moment_forcing(ops: &KronOperators, vc: &Vector) -> (Mat, Mat, Vector) {
    let n = ops.d * ops.d;
    let ar = &ops.curly_a * &ops.curly_r;
    let i_n = identity(n);
    let f_cm = kron(&ops.a_kron, &i_n) * ops.sigma_l + &ar;
    let f_mc = kron(&i_n, &ops.a_kron) * ops.sigma_l + &ar;
    let f_cc = &ar * vc.kronecker(vc);
    (f_cm, f_mc, f_cc)
}

/// `E[vec Y_t vec Y_t^T]` from `E[vec Y_0 vec Y_0^T]` and `E vec Y_0`, solved
/// exactly on the joint linear system of the first and second moments.
pub fn second_moment_ode(m0: &Mat, y0_mean: &Vector, ops: &KronOperators, c: &Mat, t: f64) -> Result<Mat> {
    let vc = check_c(ops, c)?;
    let n = ops.d * ops.d;
    let n2 = n * n;
    check_len(y0_mean, n, "E vec(Y_0)")?;
    if m0.nrows() != n || m0.ncols() != n {
        return Err(Error::Dimension(format!("second moment must be {n}x{n}")));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(m0.clone());
    }
    let (f_cm, f_mc, f_cc) = second_moment_forcing(ops, &vc);
    let (c_kron_i, i_kron_c) = kron_with_c(&vc, n);
    let size = n2 + n + 1;
    let mut g = Mat::zeros(size, size);
    g.view_mut((0, 0), (n2, n2)).copy_from(&ops.curly_c);
    g.view_mut((0, n2), (n2, n)).copy_from(&(f_cm * c_kron_i + f_mc * i_kron_c));
    g.view_mut((0, n2 + n), (n2, 1)).copy_from(&f_cc);
    g.view_mut((n2, n2), (n, n)).copy_from(&ops.curly_b);
    g.view_mut((n2, n2 + n), (n, 1)).copy_from(&(&ops.a_kron * &vc * ops.sigma_l));
    let mut z = Vector::zeros(size);
    z.rows_mut(0, n2).copy_from(&vec(m0));
    z.rows_mut(n2, n).copy_from(y0_mean);
    z[size - 1] = 1.0;
    let zt = matrix_exp(&g, t)? * z;
    unvec(&zt.rows(0, n2).into_owned())
}

/// Stationary `E[vec Y vec Y^T]`.
pub fn stationary_second_moment(ops: &KronOperators, c: &Mat, mean_y: &Vector) -> Result<Mat> {
    let vc = check_c(ops, c)?;
    check_len(mean_y, ops.d * ops.d, "E vec(Y)")?;
    let (f_cm, f_mc, f_cc) = second_moment_forcing(ops, &vc);
    let rhs = f_cc + f_cm * vc.kronecker(mean_y) + f_mc * mean_y.kronecker(&vc);
    let s = Solver::new(&ops.curly_c, "curly_c")?;
    let m = unvec(&-s.solve(&rhs))?;
    Ok(symmetrize(&m))
}

/// Stationary `var(vec Y)` assembled directly from the variance formula, with
/// the mean product written as `sigma_L^2 (curly_b^{-1} (x) curly_b^{-1}) curly_a (c (x) c)`.
pub fn stationary_var(ops: &KronOperators, c: &Mat, mean_y: &Vector) -> Result<Mat> {
    let vc = check_c(ops, c)?;
    check_len(mean_y, ops.d * ops.d, "E vec(Y)")?;
    let (f_cm, f_mc, f_cc) = second_moment_forcing(ops, &vc);
    let sb = Solver::new(&ops.curly_b, "curly_b")?;
    let binv = sb.solve_mat(&identity(ops.d * ops.d));
    let cc = vc.kronecker(&vc);
    let mean_product = kron(&binv, &binv) * (&ops.curly_a * &cc) * (ops.sigma_l * ops.sigma_l);
    let rhs = &ops.curly_c * mean_product + f_cc + f_cm * vc.kronecker(mean_y) + f_mc * mean_y.kronecker(&vc);
    let s = Solver::new(&ops.curly_c, "curly_c")?;
    let v = symmetrize(&unvec(&-s.solve(&rhs))?);
    let tol = 1e-8 * v.trace().abs().max(f64::MIN_POSITIVE);
    let min = min_eigenvalue(&v);
    if min < -tol {
        return Err(Error::NotPsd { min_eig: min, tol });
    }
    Ok(v)
}

/// First and second moments of the increment `G_1` over a period `Delta`.
#[derive(Debug, Clone)]
pub struct IncrementMoments {
    pub delta: f64,
    pub mean: Vector,
    /// `var(G_1) = E[G_1 G_1^T] = (sigma_L + sigma_W) Delta E V`.
    pub var: Mat,
    /// `vec var(G_1)` through `curly_b^{-1} (B (+) B) vec C`.
    pub vec_var: Vector,
}

pub fn increment_moments(ops: &KronOperators, c: &Mat, sigma_w: f64, delta: f64, mean_v: &Vector) -> Result<IncrementMoments> {
    let vc = check_c(ops, c)?;
    check_len(mean_v, ops.d * ops.d, "E vec(V)")?;
    if !(delta > 0.0) || !(sigma_w >= 0.0) {
        return Err(Error::InvalidParameter(format!("need Delta > 0 and sigma_W >= 0 (got {delta}, {sigma_w})")));
    }
    let scale = (ops.sigma_l + sigma_w) * delta;
    let var = symmetrize(&unvec(&(mean_v * scale))?);
    let vec_var = match Solver::new(&ops.curly_b, "curly_b") {
        Ok(s) => s.solve(&(&ops.b_sum * vc)) * scale,
        Err(_) if scale == 0.0 => Vector::zeros(ops.d * ops.d),
        Err(e) => return Err(e),
    };
    Ok(IncrementMoments { delta, mean: Vector::zeros(ops.d), var, vec_var })
}

/// `acov_{GG^T}(h) = e^{curly_b Delta h} curly_b^{-1} (I - e^{-curly_b Delta}) (sigma_L + sigma_W) M1`
/// for `h >= 1`, with `M1 = cov(vec Y_Delta, vec(G_1 G_1^T))`.
pub fn squared_increment_acov(h: u32, m1: &Mat, ops: &KronOperators, sigma_w: f64, delta: f64) -> Result<Mat> {
    if h < 1 {
        return Err(Error::InvalidParameter("squared-increment autocovariance needs h >= 1".into()));
    }
    let n = ops.d * ops.d;
    if m1.nrows() != n || m1.ncols() != n {
        return Err(Error::Dimension(format!("M1 must be {n}x{n}")));
    }
    let s = Solver::new(&ops.curly_b, "curly_b")?;
    let inner = (identity(n) - matrix_exp(&ops.curly_b, -delta)?) * m1 * (ops.sigma_l + sigma_w);
    Ok(matrix_exp(&ops.curly_b, delta * h as f64)? * s.solve_mat(&inner))
}

/// Distances of the transient moments to their stationary values.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub times: Vec<f64>,
    pub mean_distance: Vec<f64>,
    pub second_moment_distance: Vec<f64>,
    pub abscissa_curly_b: f64,
    pub abscissa_curly_c: f64,
    /// Least-squares slope of `log(mean distance)` over the second half of `times`.
    pub mean_rate: Option<f64>,
}

pub fn asymptotic_stationarity_check(
    ops: &KronOperators,
    c: &Mat,
    y0_mean: &Vector,
    y0_m: &Mat,
    times: &[f64],
) -> Result<AsymptoticReport> {
    let abscissa_b = spectral_abscissa(&ops.b);
    let abscissa_curly_b = spectral_abscissa(&ops.curly_b);
    let abscissa_curly_c = spectral_abscissa(&ops.curly_c);
    if !(abscissa_b < 0.0 && abscissa_curly_b < 0.0 && abscissa_curly_c < 0.0) {
        return Err(Error::Unstable(format!(
            "spectral abscissae B {abscissa_b:.3e}, curly_b {abscissa_curly_b:.3e}, curly_c {abscissa_curly_c:.3e}"
        )));
    }
    let st = stationary_mean(ops, c)?;
    let m_inf = stationary_second_moment(ops, c, &st.mean_y)?;
    let mut mean_distance = Vec::with_capacity(times.len());
    let mut second_moment_distance = Vec::with_capacity(times.len());
    for &t in times {
        mean_distance.push((mean_y_t(y0_mean, ops, c, t)? - &st.mean_y).norm());
        second_moment_distance.push((second_moment_ode(y0_m, y0_mean, ops, c, t)? - &m_inf).norm());
    }
    let half = times.len() / 2;
    let pts: Vec<(f64, f64)> = times[half..]
        .iter()
        .zip(&mean_distance[half..])
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    let mean_rate = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let (mt, md) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let num: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - md)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        num / den
    });
    Ok(AsymptoticReport {
        times: times.to_vec(),
        mean_distance,
        second_moment_distance,
        abscissa_curly_b,
        abscissa_curly_c,
        mean_rate,
    })
}

/// Stationary analytic moments collected in one place.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub mean_y: Vector,
    pub mean_v: Vector,
    pub second_moment: Mat,
    pub var_y: Mat,
    pub acov: Vec<(f64, Mat)>,
    pub increments: IncrementMoments,
    pub stationary: bool,
}

pub fn analytic_report(ops: &KronOperators, c: &Mat, sigma_w: f64, delta: f64, lags: &[f64]) -> Result<MomentReport> {
    let st = stationary_mean(ops, c)?;
    let second_moment = stationary_second_moment(ops, c, &st.mean_y)?;
    let var_y = stationary_var(ops, c, &st.mean_y)?;
    let acov = lags.iter().map(|&h| Ok((h, acov_y(h, &var_y, ops)?))).collect::<Result<_>>()?;
    let increments = increment_moments(ops, c, sigma_w, delta, &st.mean_v)?;
    Ok(MomentReport { mean_y: st.mean_y, mean_v: st.mean_v, second_moment, var_y, acov, increments, stationary: true })
}
