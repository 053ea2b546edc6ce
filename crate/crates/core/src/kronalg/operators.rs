use super::{commutation_perm, identity, kron, permutation_matrix, q_perm, Mat};

/// Kronecker-structured generators of the first and second moment dynamics.
///
/// With `B (+) B := B (x) I + I (x) B`:
///
/// * `curly_b = B (+) B + sigma_L A (x) A` (`d^2 x d^2`)
/// * `curly_a = (A (x) A) (x) (A (x) A)` (`d^4 x d^4`)
/// * `curly_r = rho_L (curly_q + curly_k curly_q + I)` (`d^4 x d^4`)
/// * `curly_c = (B (+) B) (x) I + I (x) (B (+) B)
///   + sigma_L ((A (x) A) (x) I + I (x) (A (x) A)) + curly_a curly_r`
///
/// `curly_q` and `curly_k` are the matrices of `vec . Q . vec^{-1}` and
/// `x -> vec(K_d vec^{-1}(x))` on `R^{d^4}`.
#[derive(Debug, Clone)]
pub struct KronOperators {
    pub d: usize,
    pub a: Mat,
    pub b: Mat,
    pub sigma_l: f64,
    pub rho_l: f64,
    pub kd: Mat,
    pub curly_q: Mat,
    pub curly_k: Mat,
    pub a_kron: Mat,
    pub b_sum: Mat,
    pub curly_b: Mat,
    pub curly_a: Mat,
    pub curly_r: Mat,
    pub curly_c: Mat,
    q_perm: Vec<usize>,
}

impl KronOperators {
    pub fn build(a: &Mat, b: &Mat, sigma_l: f64, rho_l: f64) -> Self {
        let d = a.nrows();
        let n = d * d;
        let n2 = n * n;
        let i_d = identity(d);
        let i_n = identity(n);

        let kd = permutation_matrix(&commutation_perm(d));
        let qp = q_perm(d);
        let curly_q = permutation_matrix(&qp);

        // vec(K_d X) permutes rows inside every column block of length d^2.
        let kp = commutation_perm(d);
        let mut curly_k_perm = vec![0; n2];
        for col in 0..n {
            for row in 0..n {
                curly_k_perm[col * n + row] = col * n + kp[row];
            }
        }
        let curly_k = permutation_matrix(&curly_k_perm);

        let a_kron = kron(a, a);
        let b_sum = kron(b, &i_d) + kron(&i_d, b);
        let curly_b = &b_sum + &a_kron * sigma_l;
        let curly_a = kron(&a_kron, &a_kron);
        let curly_r = (&curly_q + &curly_k * &curly_q + identity(n2)) * rho_l;
        let curly_c = kron(&b_sum, &i_n)
            + kron(&i_n, &b_sum)
            + (kron(&a_kron, &i_n) + kron(&i_n, &a_kron)) * sigma_l
            + &curly_a * &curly_r;

        Self {
            d,
            a: a.clone(),
            b: b.clone(),
            sigma_l,
            rho_l,
            kd,
            curly_q,
            curly_k,
            a_kron,
            b_sum,
            curly_b,
            curly_a,
            curly_r,
            curly_c,
            q_perm: qp,
        }
    }

    /// `R X = rho_L (Q X + K_d Q X + X)` on `d^2 x d^2` matrices.
    pub fn apply_r(&self, x: &Mat) -> Mat {
        let n = self.d * self.d;
        let src = x.as_slice();
        let qx = Mat::from_iterator(n, n, self.q_perm.iter().map(|&s| src[s]));
        (&qx + &self.kd * &qx + x) * self.rho_l
    }

    /// `I_{d^2} + K_d + vec(I_d) vec(I_d)^T`: the normalised quartic
    /// moment of a standard normal jump.
    pub fn quartic_normal_pattern(&self) -> Mat {
        let d = self.d;
        let vi = super::vec(&identity(d));
        identity(d * d) + &self.kd + &vi * vi.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kronalg::{matrix_exp, q_operator, unvec, vec, Vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut impl Rng, d: usize, scale: f64) -> Mat {
        Mat::from_fn(d, d, |_, _| rng.random_range(-scale..scale))
    }

    #[test]
    fn permutation_operators_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in 1..4 {
            let a = rand_mat(&mut rng, d, 1.0);
            let ops = KronOperators::build(&a, &a, 0.5, 0.3);
            let n = d * d;
            assert_eq!(ops.curly_k, kron(&identity(n), &ops.kd));
            let x = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            assert_eq!(&ops.curly_q * vec(&x), vec(&q_operator(&x).unwrap()));
            assert_eq!(&ops.curly_k * vec(&x), vec(&(&ops.kd * &x)));
            for p in [&ops.curly_q, &ops.curly_k] {
                for r in 0..p.nrows() {
                    assert_eq!(p.row(r).sum(), 1.0);
                    assert_eq!(p.column(r).sum(), 1.0);
                }
            }
            let rx = ops.apply_r(&x);
            assert!((vec(&rx) - &ops.curly_r * vec(&x)).amax() < 1e-14);
        }
    }

    #[test]
    fn zero_a_reduces_generators() {
        let b = Mat::from_row_slice(2, 2, &[-1.0, 0.3, 0.1, -0.5]);
        let ops = KronOperators::build(&Mat::zeros(2, 2), &b, 2.0, 3.0);
        assert_eq!(ops.curly_b, ops.b_sum);
        let bb = &ops.b_sum;
        let expected = kron(bb, &identity(4)) + kron(&identity(4), bb);
        assert_eq!(ops.curly_c, expected);
        assert_eq!(ops.curly_b.nrows(), 4);
        assert_eq!(ops.curly_c.nrows(), 16);
    }

    #[test]
    fn scalar_reduction() {
        let (a, b, sl, rl) = (0.7, -1.3, 1.5, 2.5);
        let ops = KronOperators::build(&Mat::from_element(1, 1, a), &Mat::from_element(1, 1, b), sl, rl);
        assert!((ops.curly_b[(0, 0)] - (2.0 * b + sl * a * a)).abs() < 1e-14);
        let c = 4.0 * b + 2.0 * sl * a * a + 3.0 * rl * a.powi(4);
        assert!((ops.curly_c[(0, 0)] - c).abs() < 1e-13, "{} vs {c}", ops.curly_c[(0, 0)]);
        assert_eq!(ops.quartic_normal_pattern()[(0, 0)], 3.0);
    }

    /// Oracle: the second-moment generator assembled column by column from
    /// its matrix form `M -> B M + M B^T + (A(x)A) R(M) (A(x)A)^T` with
    /// `B = curly_b`, never touching the Kronecker formula for `curly_c`.
    #[test]
    fn curly_c_matches_matrix_form_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for d in 1..4 {
            let a = rand_mat(&mut rng, d, 0.8);
            let b = rand_mat(&mut rng, d, 1.0);
            let (sl, rl) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
            let ops = KronOperators::build(&a, &b, sl, rl);
            let n = d * d;
            let mut oracle = Mat::zeros(n * n, n * n);
            for k in 0..n * n {
                let mut e = Vector::zeros(n * n);
                e[k] = 1.0;
                let m = unvec(&e).unwrap();
                let img = &ops.curly_b * &m
                    + &m * ops.curly_b.transpose()
                    + &ops.a_kron * ops.apply_r(&m) * ops.a_kron.transpose();
                oracle.set_column(k, &vec(&img));
            }
            assert!((&oracle - &ops.curly_c).amax() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn curly_b_exponential_is_the_mean_flow() {
        // d/dt vec(e^{Bt} X e^{B^T t}) = (B (+) B) vec(...)
        let b = Mat::from_row_slice(2, 2, &[-1.0, 0.4, -0.2, -0.6]);
        let ops = KronOperators::build(&Mat::zeros(2, 2), &b, 0.0, 0.0);
        let x = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let e = matrix_exp(&b, 0.8).unwrap();
        let lhs = vec(&(&e * &x * e.transpose()));
        let rhs = matrix_exp(&ops.curly_b, 0.8).unwrap() * vec(&x);
        assert!((lhs - rhs).amax() < 1e-12);
    }
}
