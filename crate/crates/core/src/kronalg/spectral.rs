use std::cmp::Ordering;

use nalgebra::SVD;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{op_norm2_c, symmetrize, to_complex, CMat, CVector, Mat, Vector};
use crate::error::{Error, Result};

/// Eigenvector matrices above this condition number are treated as defective.
pub const DIAGONALIZABLE_MAX_COND: f64 = 1e8;

/// Eigen-decomposition `B = S D S^{-1}` of a diagonalizable real matrix.
///
/// Columns of `S` have unit Euclidean norm. Eigenvalues are sorted by real
/// part descending, ties broken by imaginary part descending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub s: CMat,
    pub s_inv: CMat,
    pub eigenvalues: Vec<Complex64>,
    /// `max Re sigma(B)`.
    pub lambda: f64,
    pub cond: f64,
    /// `S^{-1} (x) S^{-1}`, the map defining the B,S vector norm.
    pub(crate) sinv_kron: CMat,
    pub(crate) s_kron: CMat,
}

fn eig_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.re.partial_cmp(&a.re)
        .unwrap_or(Ordering::Equal)
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

/// Eigenvalues of a real square matrix in the canonical order.
pub fn sorted_eigenvalues(b: &Mat) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = b.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(eig_order);
    ev
}

/// `max Re sigma(M)`; needs no diagonalizability.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

impl SpectralData {
    pub fn diagonalize(b: &Mat) -> Result<Self> {
        if !b.is_square() || b.is_empty() {
            return Err(Error::Dimension("diagonalize expects a non-empty square matrix".into()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("B"));
        }
        let d = b.nrows();
        let (s, eigenvalues) = if is_diag(b) {
            diagonal_basis(b)
        } else if super::is_symmetric(b, 1e-14) {
            symmetric_basis(b)
        } else {
            general_basis(b)
        };

        let sv = s.clone().singular_values();
        let cond = sv.max() / sv.min();
        if !cond.is_finite() || cond > DIAGONALIZABLE_MAX_COND {
            return Err(Error::NonDiagonalizable { cond });
        }
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or(Error::NonDiagonalizable { cond: f64::INFINITY })?;

        let dmat = CMat::from_diagonal(&CVector::from_vec(eigenvalues.clone()));
        let bc = to_complex(b);
        let residual = op_norm2_c(&(&bc * &s - &s * &dmat));
        let scale = op_norm2_c(&bc).max(f64::MIN_POSITIVE);
        if residual > 1e-8 * scale {
            return Err(Error::NonDiagonalizable { cond: cond.max(1.0 / f64::EPSILON) });
        }

        let lambda = eigenvalues[0].re;
        let sinv_kron = s_inv.kronecker(&s_inv);
        let s_kron = s.kronecker(&s);
        debug_assert_eq!(sinv_kron.nrows(), d * d);
        Ok(Self { s, s_inv, eigenvalues, lambda, cond, sinv_kron, s_kron })
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    /// `S D S^{-1}`.
    pub fn reconstruct(&self) -> CMat {
        let dmat = CMat::from_diagonal(&CVector::from_vec(self.eigenvalues.clone()));
        &self.s * dmat * &self.s_inv
    }

    pub fn s_norm(&self) -> f64 {
        op_norm2_c(&self.s)
    }

    pub fn s_inv_norm(&self) -> f64 {
        op_norm2_c(&self.s_inv)
    }

    /// Whether `S` is unitary to rounding.
    pub fn is_unitary(&self) -> bool {
        let d = self.dim();
        let gram = self.s.adjoint() * &self.s;
        (gram - CMat::identity(d, d)).iter().all(|z| z.norm() < 1e-10)
    }
}

fn is_diag(b: &Mat) -> bool {
    let d = b.nrows();
    (0..d).all(|j| (0..d).all(|i| i == j || b[(i, j)] == 0.0))
}

fn diagonal_basis(b: &Mat) -> (CMat, Vec<Complex64>) {
    let d = b.nrows();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| eig_order(&Complex64::new(b[(i, i)], 0.0), &Complex64::new(b[(j, j)], 0.0)));
    let mut s = CMat::zeros(d, d);
    for (col, &i) in idx.iter().enumerate() {
        s[(i, col)] = Complex64::new(1.0, 0.0);
    }
    (s, idx.iter().map(|&i| Complex64::new(b[(i, i)], 0.0)).collect())
}

fn symmetric_basis(b: &Mat) -> (CMat, Vec<Complex64>) {
    let d = b.nrows();
    let eig = symmetrize(b).symmetric_eigen();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(Ordering::Equal)
    });
    let s = CMat::from_fn(d, d, |r, c| Complex64::new(eig.eigenvectors[(r, idx[c])], 0.0));
    (s, idx.iter().map(|&i| Complex64::new(eig.eigenvalues[i], 0.0)).collect())
}

/// Eigenvectors of a general real matrix: eigenvalues are grouped into
/// clusters of numerically equal values, and each cluster's eigenspace is
/// taken as the right singular vectors of `B - mu I` belonging to its
/// smallest singular values.
fn general_basis(b: &Mat) -> (CMat, Vec<Complex64>) {
    let d = b.nrows();
    let ev = sorted_eigenvalues(b);
    let scale = super::op_norm2(b).max(1.0);
    let tol = 1e-6 * scale;

    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for z in ev {
        match clusters.iter_mut().find(|c| (c[0] - z).norm() <= tol) {
            Some(c) => c.push(z),
            None => clusters.push(vec![z]),
        }
    }

    let bc = to_complex(b);
    let mut columns = Vec::with_capacity(d);
    let mut values = Vec::with_capacity(d);
    for cluster in &clusters {
        let mu = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
        let shifted = &bc - CMat::identity(d, d) * mu;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap_or(Ordering::Equal)
        });
        for &k in order.iter().take(cluster.len()) {
            let col = CVector::from_fn(d, |r, _| v_t[(k, r)].conj());
            columns.push(normalize_phase(col));
            values.push(mu);
        }
    }
    (CMat::from_columns(&columns), values)
}

/// Unit norm, and the largest-magnitude entry made real positive so the
/// basis does not depend on the SVD's arbitrary phase.
fn normalize_phase(v: CVector) -> CVector {
    let pivot = v.iter().copied().max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()).unwrap();
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
    let v = v * phase;
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// `||x||_{B,S} = ||(S^{-1} (x) S^{-1}) x||_2` for `x` in `R^{d^2}`.
pub fn bs_norm_vec(x: &Vector, spec: &SpectralData) -> Result<f64> {
    if x.len() != spec.sinv_kron.ncols() {
        return Err(Error::Dimension(format!(
            "B,S norm expects length {}, got {}",
            spec.sinv_kron.ncols(),
            x.len()
        )));
    }
    let xc = x.map(|v| Complex64::new(v, 0.0));
    Ok((&spec.sinv_kron * xc).norm())
}

/// Operator norm induced by [`bs_norm_vec`]:
/// `||(S^{-1} (x) S^{-1}) X (S (x) S)||_2`.
pub fn bs_norm_mat(x: &Mat, spec: &SpectralData) -> Result<f64> {
    let n = spec.sinv_kron.nrows();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::Dimension(format!("B,S operator norm expects {n}x{n}")));
    }
    Ok(op_norm2_c(&(&spec.sinv_kron * to_complex(x) * &spec.s_kron)))
}

/// How to obtain `K_{2,B}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum K2bMode {
    /// Randomised search for the supremum, refined by local ascent.
    Search { samples: usize, seed: u64 },
    /// The closed-form upper bound `||S||_2^2`.
    UpperBound,
}

impl Default for K2bMode {
    fn default() -> Self {
        K2bMode::Search { samples: 10_000, seed: 0x6b32_6200 }
    }
}

/// `K_{2,B} = sup { ||X||_2 / ||vec X||_{B,S} : X PSD, X != 0 }`.
pub fn k2b(spec: &SpectralData, mode: K2bMode) -> f64 {
    let upper = spec.s_norm().powi(2);
    match mode {
        K2bMode::UpperBound => upper,
        K2bMode::Search { samples, seed } => k2b_search(spec, samples, seed).min(upper),
    }
}

fn k2b_ratio(x: &Mat, spec: &SpectralData) -> f64 {
    let top = x.symmetric_eigenvalues().max();
    let denom = bs_norm_vec(&super::vec(x), spec).expect("dimension fixed by spec");
    if denom > 0.0 { top / denom } else { 0.0 }
}

fn project_psd(x: &Mat) -> Mat {
    let eig = symmetrize(x).symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * Mat::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

fn k2b_search(spec: &SpectralData, samples: usize, seed: u64) -> f64 {
    let d = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Best rank-one candidate in closed form: for real unit v,
    // ||vec(v v^T)||_{B,S} = v^T Re(S^{-H} S^{-1}) v.
    let h = spec.s_inv.adjoint() * &spec.s_inv;
    let h_re = symmetrize(&h.map(|z| z.re));
    let eig = h_re.symmetric_eigen();
    let imin = eig.eigenvalues.imin();
    let v: Vector = eig.eigenvectors.column(imin).into_owned();
    let mut best_x = &v * v.transpose();
    let mut best = k2b_ratio(&best_x, spec);

    for _ in 0..samples {
        let rank = rng.random_range(1..=d);
        let g = Mat::from_fn(d, rank, |_, _| rng.sample(StandardNormal));
        let x = &g * g.transpose();
        let r = k2b_ratio(&x, spec);
        if r > best {
            best = r;
            best_x = x;
        }
    }

    // Local ascent with a shrinking step on the unit-spectral-norm slice.
    let mut step = 0.1;
    let mut x = &best_x / best_x.symmetric_eigenvalues().max();
    for _ in 0..400 {
        let e = symmetrize(&Mat::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal)));
        let cand = project_psd(&(&x + e * step));
        let top = cand.symmetric_eigenvalues().max();
        if top <= 0.0 {
            continue;
        }
        let cand = cand / top;
        let r = k2b_ratio(&cand, spec);
        if r > best {
            best = r;
            x = cand;
        } else {
            step *= 0.97;
        }
        if step < 1e-9 {
            break;
        }
    }
    best
}

/// `(S^{-1} (x) S^{-1}) (x) (S^{-1} (x) S^{-1})` and its inverse, the
/// coordinate change for the B,S norms on `R^{d^4}`.
pub(crate) fn kron4(spec: &SpectralData) -> (CMat, CMat) {
    (kron_c(&spec.sinv_kron, &spec.sinv_kron), kron_c(&spec.s_kron, &spec.s_kron))
}

fn kron_c(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kronalg::{identity, kron, matrix_exp, op_norm2, vec};
    use approx::assert_relative_eq;

    fn counterexample_b() -> Mat {
        let a = -0.5 * (10.0f64 / 9.0).ln();
        Mat::from_row_slice(2, 2, &[a, 0.0, 1.0, a])
    }

    fn random_stable(rng: &mut impl Rng, d: usize) -> Mat {
        let g = Mat::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let shift = crate::kronalg::spectral::spectral_abscissa(&g) + 0.5;
        g - identity(d) * shift
    }

    #[test]
    fn minus_identity_is_canonical() {
        let sd = SpectralData::diagonalize(&(-identity(2))).unwrap();
        assert_eq!(sd.s, CMat::identity(2, 2));
        assert_eq!(sd.lambda, -1.0);
        let sd = SpectralData::diagonalize(&Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0]))).unwrap();
        assert_eq!(sd.lambda, -1.0);
        assert_eq!(sd.eigenvalues[1].re, -2.0);
    }

    #[test]
    fn jordan_block_is_rejected() {
        assert!(matches!(
            SpectralData::diagonalize(&counterexample_b()),
            Err(Error::NonDiagonalizable { .. })
        ));
        assert!((spectral_abscissa(&counterexample_b()) + 0.5 * (10.0f64 / 9.0).ln()).abs() < 1e-7);
    }

    #[test]
    fn general_reconstruction_and_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..6 {
            for _ in 0..10 {
                let b = random_stable(&mut rng, d);
                let sd = SpectralData::diagonalize(&b).unwrap();
                let err = (sd.reconstruct() - to_complex(&b)).map(|z| z.norm()).max();
                assert!(err <= 1e-8 * op_norm2(&b), "d={d} err={err}");
                assert!((sd.lambda - spectral_abscissa(&b)).abs() < 1e-10);
                for w in sd.eigenvalues.windows(2) {
                    assert_ne!(eig_order(&w[0], &w[1]), Ordering::Greater);
                }
            }
        }
    }

    #[test]
    fn repeated_eigenvalue_diagonalizable() {
        // similar to -I(2) (+) -3 through a non-orthogonal basis
        let p = Mat::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.2, 1.0, 0.5, 0.0, 0.1, 1.0]);
        let dgl = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -1.0, -3.0]));
        let b = &p * dgl * p.clone().try_inverse().unwrap();
        let sd = SpectralData::diagonalize(&b).unwrap();
        assert!((sd.reconstruct() - to_complex(&b)).map(|z| z.norm()).max() < 1e-8);
    }

    #[test]
    fn unitary_s_gives_euclidean_norms() {
        let b = Mat::from_row_slice(2, 2, &[-1.0, 0.4, 0.4, -2.0]);
        let sd = SpectralData::diagonalize(&b).unwrap();
        assert!(sd.is_unitary());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        assert_relative_eq!(bs_norm_vec(&x, &sd).unwrap(), x.norm(), max_relative = 1e-12);
        let m = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        assert_relative_eq!(bs_norm_mat(&m, &sd).unwrap(), op_norm2(&m), max_relative = 1e-10);
        assert_relative_eq!(k2b(&sd, K2bMode::default()), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn flow_operator_has_bs_norm_exp_two_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in 1..4 {
            let b = random_stable(&mut rng, d);
            let sd = SpectralData::diagonalize(&b).unwrap();
            let gen = kron(&identity(d), &b) + kron(&b, &identity(d));
            for &t in &[0.1, 0.5, 2.0] {
                let e = matrix_exp(&gen, t).unwrap();
                assert_relative_eq!(bs_norm_mat(&e, &sd).unwrap(), (2.0 * sd.lambda * t).exp(), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn bs_norm_equivalence_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for d in 1..4 {
            let b = random_stable(&mut rng, d);
            let sd = SpectralData::diagonalize(&b).unwrap();
            let (sn, sin) = (sd.s_norm(), sd.s_inv_norm());
            for _ in 0..20 {
                let x = Vector::from_fn(d * d, |_, _| rng.random_range(-1.0..1.0));
                let y = Vector::from_fn(d * d, |_, _| rng.random_range(-1.0..1.0));
                let nx = bs_norm_vec(&x, &sd).unwrap();
                assert!(nx <= sin * sin * x.norm() * (1.0 + 1e-10));
                assert!(x.norm() <= sn * sn * nx * (1.0 + 1e-10));
                assert!(bs_norm_vec(&(&x + &y), &sd).unwrap() <= nx + bs_norm_vec(&y, &sd).unwrap() + 1e-12);
                assert_relative_eq!(bs_norm_vec(&(&x * -2.5), &sd).unwrap(), 2.5 * nx, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn scalar_case() {
        let sd = SpectralData::diagonalize(&Mat::from_element(1, 1, -0.7)).unwrap();
        let x = Vector::from_element(1, -3.0);
        assert_eq!(bs_norm_vec(&x, &sd).unwrap(), 3.0);
        assert_relative_eq!(k2b(&sd, K2bMode::default()), 1.0 / bs_norm_vec(&Vector::from_element(1, 1.0), &sd).unwrap());
    }

    #[test]
    fn k2b_respects_upper_bound_and_beats_s_norm_for_real_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for d in 2..4 {
            for _ in 0..5 {
                let b = random_stable(&mut rng, d);
                let sd = SpectralData::diagonalize(&b).unwrap();
                let est = k2b(&sd, K2bMode::Search { samples: 2000, seed: 1 });
                let upper = k2b(&sd, K2bMode::UpperBound);
                assert!(est <= upper * (1.0 + 1e-12));
                assert!(est >= 1.0 / (sd.s_inv_norm().powi(2)) * (1.0 - 1e-12));
                if sd.eigenvalues.iter().all(|z| z.im == 0.0) {
                    // real S: a real rank-one matrix attains ||S||_2^2
                    assert_relative_eq!(est, upper, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn k2b_ratio_of_identity_direction() {
        let sd = SpectralData::diagonalize(&Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0])).unwrap();
        let r = k2b_ratio(&identity(2), &sd);
        assert!(r <= k2b(&sd, K2bMode::default()));
        assert!(bs_norm_vec(&vec(&identity(2)), &sd).unwrap() > 0.0);
    }
}
