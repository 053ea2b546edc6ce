//! Dense matrix kernel: column-stacking `vec`, Kronecker structure matrices,
//! the matrix exponential, PSD square roots and a few norm helpers.
//!
//! Everything here is a pure function of its inputs. Dimensions are small
//! (`d <= 6`, so the largest objects are `d^4 x d^4`), and all storage is
//! dense and column-major, which makes `vec` a plain reinterpretation of the
//! underlying buffer.

mod operators;
mod spectral;

pub use operators::KronOperators;
pub(crate) use spectral::kron4;
pub use spectral::{bs_norm_mat, bs_norm_vec, k2b, sorted_eigenvalues, spectral_abscissa, K2bMode, SpectralData};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance used when clamping rounding-level negative eigenvalues.
pub const PSD_CLAMP_RTOL: f64 = 1e-10;

/// Stacks the columns of `x` below one another.
pub fn vec(x: &Mat) -> Vector {
    Vector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`] for square matrices.
pub fn unvec(v: &Vector) -> Result<Mat> {
    let d = exact_sqrt(v.len()).ok_or_else(|| {
        Error::Dimension(format!("vector of length {} is not a vec of a square matrix", v.len()))
    })?;
    Ok(Mat::from_column_slice(d, d, v.as_slice()))
}

/// Half-vectorisation: the lower triangle stacked column by column.
pub fn vech(x: &Mat) -> Vec<f64> {
    let d = x.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in j..d {
            out.push(x[(i, j)]);
        }
    }
    out
}

pub(crate) fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Index map of the commutation matrix: `(K_d v)[i] = v[perm[i]]`.
fn commutation_perm(d: usize) -> Vec<usize> {
    // vec position of entry (i, j) is j*d + i, and K_d vec(A) = vec(A^T).
    let mut perm = vec![0; d * d];
    for i in 0..d {
        for j in 0..d {
            perm[j * d + i] = i * d + j;
        }
    }
    perm
}

pub(crate) fn permutation_matrix(perm: &[usize]) -> Mat {
    let n = perm.len();
    let mut p = Mat::zeros(n, n);
    for (row, &col) in perm.iter().enumerate() {
        p[(row, col)] = 1.0;
    }
    p
}

/// The commutation matrix `K_d`, characterised by `K_d vec(A) = vec(A^T)`.
pub fn commutation_matrix(d: usize) -> Mat {
    permutation_matrix(&commutation_perm(d))
}

/// Index map of the reshuffle operator on `d^2 x d^2` matrices, expressed on
/// their vec: `vec(Q X)[i] = vec(X)[perm[i]]`.
pub(crate) fn q_perm(d: usize) -> Vec<usize> {
    let n = d * d;
    let mut perm = vec![0; n * n];
    for k in 0..d {
        for l in 0..d {
            for p in 0..d {
                for q in 0..d {
                    let (tr, tc) = (k * d + l, p * d + q);
                    let (sr, sc) = (k * d + p, l * d + q);
                    perm[tc * n + tr] = sc * n + sr;
                }
            }
        }
    }
    perm
}

/// Reshuffle operator `Q` on `d^2 x d^2` matrices:
/// `(Q X)[(k,l),(p,q)] = X[(k,p),(l,q)]`, so that `Q(vec X vec Z^T) = X (x) Z`
/// for symmetric `X, Z`.
pub fn q_operator(x: &Mat) -> Result<Mat> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::Dimension(format!("Q expects a square matrix, got {}x{}", n, x.ncols())));
    }
    let d = exact_sqrt(n)
        .ok_or_else(|| Error::Dimension(format!("Q expects a d^2 x d^2 matrix, got side {n}")))?;
    let perm = q_perm(d);
    let src = x.as_slice();
    Ok(Mat::from_iterator(n, n, perm.iter().map(|&s| src[s])))
}

/// `e^{M t}` by scaling and squaring with a Pade approximant.
pub fn matrix_exp(m: &Mat, t: f64) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("exp of non-square {}x{}", m.nrows(), m.ncols())));
    }
    if !t.is_finite() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    if t == 0.0 {
        return Ok(identity(m.nrows()));
    }
    let e = (m * t).exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential output"));
    }
    Ok(e)
}

/// Spectral norm (largest singular value).
pub fn op_norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn op_norm2_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub(crate) fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn is_symmetric(x: &Mat, tol: f64) -> bool {
    x.is_square() && (x - x.transpose()).amax() <= tol * (1.0 + x.amax())
}

pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `x`.
pub fn min_eigenvalue(x: &Mat) -> f64 {
    symmetrize(x).symmetric_eigenvalues().min()
}

pub(crate) fn psd_tolerance(x: &Mat) -> f64 {
    PSD_CLAMP_RTOL * x.trace().abs().max(f64::MIN_POSITIVE)
}

/// Positive semidefinite square root.
///
/// Eigenvalues in `[-tol, 0)` with `tol = 1e-10 * tr(X)` are clamped to zero;
/// anything more negative is an error.
pub fn psd_sqrt(x: &Mat) -> Result<Mat> {
    if !is_symmetric(x, 1e-10) {
        return Err(Error::InvalidParameter("psd_sqrt of a non-symmetric matrix".into()));
    }
    let d = x.nrows();
    let tol = psd_tolerance(x);
    if is_diagonal(x) {
        let mut out = Mat::zeros(d, d);
        for i in 0..d {
            out[(i, i)] = clamped_sqrt(x[(i, i)], tol)?;
        }
        return Ok(out);
    }
    let eig = symmetrize(x).symmetric_eigen();
    let mut roots = Vector::zeros(d);
    for i in 0..d {
        roots[i] = clamped_sqrt(eig.eigenvalues[i], tol)?;
    }
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * Mat::from_diagonal(&roots) * q.transpose())))
}

fn clamped_sqrt(v: f64, tol: f64) -> Result<f64> {
    if v < -tol {
        return Err(Error::NotPsd { min_eig: v, tol });
    }
    Ok(v.max(0.0).sqrt())
}

fn is_diagonal(x: &Mat) -> bool {
    let d = x.nrows();
    (0..d).all(|j| (0..d).all(|i| i == j || x[(i, j)] == 0.0))
}
