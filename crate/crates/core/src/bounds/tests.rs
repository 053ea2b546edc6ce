use super::*;
use crate::kronalg::identity;
use crate::levy::{sample_jumps, tilde_l_jumps, EpsilonLaw, JumpStream, Jump};
use crate::sim::{regular_grid, simulate_path, simulate_with_stream, InitialState, SimOptions};
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cp(dim: usize, rate: f64) -> LevySpec {
    LevySpec::compound_poisson(dim, rate, EpsilonLaw::Constant { value: 1.0 })
}

fn params2() -> ModelParams {
    ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.05, 0.35]),
        Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -1.5]),
        Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
    )
    .unwrap()
}

fn scalar(a: f64, b: f64, c: f64) -> ModelParams {
    ModelParams::new(Mat::from_element(1, 1, a), Mat::from_element(1, 1, b), Mat::from_element(1, 1, c)).unwrap()
}

/// Real, non-orthogonal eigenbasis with a stable spectrum.
fn random_diagonalizable(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    loop {
        let s = Mat::from_fn(d, d, |i, j| if i == j { 1.0 } else { rng.random_range(-0.6..0.6) });
        if let Some(si) = s.clone().try_inverse() {
            let ev = Mat::from_diagonal(&Vector::from_fn(d, |_, _| -rng.random_range(0.3..2.0)));
            return &s * ev * si;
        }
    }
}

#[test]
fn bound_without_jumps_decays_exponentially() {
    let bp = BoundParams { lambda: -0.7, alpha1: 2.0, c_level: 1.0, k2b: 1.0, a_norm: 1.0, mode: SubstitutionMode::Exact };
    let grid = [0.0, 0.5, 2.0];
    let path = bound_process(&bp, &[], 3.0, &grid).unwrap();
    for (t, y) in grid.iter().zip(&path.values) {
        assert_relative_eq!(*y, (2.0 * -0.7 * t).exp() * 3.0, max_relative = 1e-15);
    }
}

#[test]
fn bound_after_one_jump() {
    let bp = BoundParams { lambda: -0.4, alpha1: 1.3, c_level: 0.9, k2b: 1.0, a_norm: 1.3, mode: SubstitutionMode::Exact };
    let path = bound_process(&bp, &[(0.5, 2.0)], 0.0, &[0.0, 0.25, 1.5]).unwrap();
    assert_eq!(path.values[1], 0.0);
    assert_relative_eq!(path.values[2], 1.3 * 0.9 * 2.0 * (2.0 * -0.4 * 1.0f64).exp(), max_relative = 1e-14);
    assert!(bound_process(&bp, &[(0.5, 1.0), (0.4, 1.0)], 0.0, &[0.0, 1.0]).is_err());
    assert!(bound_process(&bp, &[(2.0, 1.0)], 0.0, &[0.0, 1.0]).is_err());
}

#[test]
fn scalar_bound_is_the_scalar_process() {
    let p = scalar(0.6, -0.8, 1.4);
    let sd = p.spectral().unwrap();
    let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
    assert_relative_eq!(bp.alpha1, 0.36, max_relative = 1e-14);
    assert_relative_eq!(bp.c_level, 1.4, max_relative = 1e-14);
    let s = sample_jumps(&cp(1, 2.0), 10.0, 4).unwrap();
    let grid = regular_grid(10.0, 0.5).unwrap();
    let y0 = Mat::from_element(1, 1, 0.3);
    let path = simulate_with_stream(&p, &s, &grid, &y0).unwrap();
    let bound = bound_process(&bp, &tilde_l_jumps(&s, &sd).unwrap(), 0.3, &grid).unwrap();
    for (y, b) in path.y.iter().zip(&bound.values) {
        assert_relative_eq!(y[(0, 0)], *b, max_relative = 1e-11);
    }
}

#[test]
fn domination_trivial_and_random() {
    let p = params2();
    let sd = p.spectral().unwrap();
    let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
    let grid = regular_grid(5.0, 0.5).unwrap();
    let quiet = simulate_with_stream(&p, &JumpStream::empty(5.0), &grid, &Mat::zeros(2, 2)).unwrap();
    let b0 = bound_process(&bp, &[], 0.0, &grid).unwrap();
    assert_eq!(verify_domination(&quiet, &b0, &sd).unwrap(), 0.0);

    let y0 = Mat::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.4]);
    let flow = simulate_with_stream(&p, &JumpStream::empty(5.0), &grid, &y0).unwrap();
    let yb = bs_norm_vec(&vec(&y0), &sd).unwrap();
    let bf = bound_process(&bp, &[], yb, &grid).unwrap();
    assert!(verify_domination(&flow, &bf, &sd).unwrap() <= 1e-12);

    let opts = SimOptions::with_initial(InitialState::Given(y0));
    for seed in 0..20 {
        let path = simulate_path(&p, &cp(2, 2.0), &grid, seed, &opts).unwrap();
        let s = JumpStream::from_jumps(5.0, path.jumps.iter().map(|r| Jump { time: r.time, x: r.x.clone() }).collect()).unwrap();
        let b = bound_process(&bp, &tilde_l_jumps(&s, &sd).unwrap(), yb, &grid).unwrap();
        let worst = verify_domination(&path, &b, &sd).unwrap();
        assert!(worst <= 1e-8 * (1.0 + b.values.iter().cloned().fold(0.0, f64::max)), "seed {seed}: {worst}");
    }
    let short = bound_process(&bp, &[], 0.0, &grid[..3]).unwrap();
    assert!(verify_domination(&quiet, &short, &sd).is_err());
}

#[test]
fn normal_b_collapses_to_euclidean() {
    let p = params2();
    let sd = p.spectral().unwrap();
    assert!(sd.is_unitary());
    let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
    assert_relative_eq!(bp.alpha1, op_norm2(p.a()).powi(2), max_relative = 1e-10);
    assert_relative_eq!(bp.k2b, 1.0, max_relative = 1e-12);
    let safe = BoundParams::new(&p, &sd, SubstitutionMode::Safe).unwrap();
    assert_relative_eq!(safe.alpha1, bp.alpha1, max_relative = 1e-10);
    let x = Vector::from_vec(vec![0.3, -1.2]);
    assert_relative_eq!(rank_one_bs_norm(&x, &sd), x.norm_squared(), max_relative = 1e-12);
}

#[test]
fn safe_mode_dominates_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = regular_grid(5.0, 0.25).unwrap();
    for seed in 0..10 {
        let b = random_diagonalizable(&mut rng, 2);
        let p = ModelParams::new(params2().a().clone(), b, params2().c().clone()).unwrap();
        let sd = p.spectral().unwrap();
        let exact = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
        let safe = BoundParams::new(&p, &sd, SubstitutionMode::Safe).unwrap();
        assert!(safe.k2b >= exact.k2b * (1.0 - 1e-12));
        let s = sample_jumps(&cp(2, 3.0), 5.0, seed).unwrap();
        let path = simulate_with_stream(&p, &s, &grid, &Mat::zeros(2, 2)).unwrap();
        let bound = bound_process(&safe, &tilde_l_jumps(&s, &sd).unwrap(), 0.0, &grid).unwrap();
        assert!(verify_domination(&path, &bound, &sd).unwrap() <= 1e-8);
        let x = Vector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        assert_relative_eq!(rank_one_bs_norm(&x, &sd), bs_norm_vec(&vec(&(&x * x.transpose())), &sd).unwrap(), max_relative = 1e-12);
    }
}

#[test]
fn verdict_rule() {
    assert_eq!(Verdict::from_estimate(1.0, 0.1, 1.5), Verdict::Satisfied);
    assert_eq!(Verdict::from_estimate(1.0, 0.2, 1.5), Verdict::Inconclusive);
    assert_eq!(Verdict::from_estimate(2.0, 0.1, 1.5), Verdict::Violated);
}

#[test]
fn zero_a_conditions() {
    let p = ModelParams::new(Mat::zeros(2, 2), params2().b().clone(), identity(2)).unwrap();
    let sd = p.spectral().unwrap();
    let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
    let f = log_moment_condition(&bp, &cp(2, 1.0), &sd, 1000, 1).unwrap();
    assert_eq!((f.lhs, f.se), (0.0, 0.0));
    assert_eq!(f.verdict, Verdict::Satisfied);
    for f in k_moment_conditions(&bp, &cp(2, 1.0), &sd, &[1, 2, 3], 1000, 1).unwrap() {
        assert_eq!(f.verdict, Verdict::Satisfied);
    }
    let unstable = ModelParams::new(Mat::zeros(1, 1), Mat::from_element(1, 1, 0.1), Mat::from_element(1, 1, 1.0)).unwrap();
    let sdu = unstable.spectral().unwrap();
    let bpu = BoundParams::new(&unstable, &sdu, SubstitutionMode::Exact).unwrap();
    assert_eq!(log_moment_condition(&bpu, &cp(1, 1.0), &sdu, 1000, 1).unwrap().verdict, Verdict::Violated);
}

/// Oracle: `E log(1 + a^2 X^2)` for standard normal `X` by trapezoid
/// quadrature against the density.
#[test]
fn scalar_log_moment_matches_quadrature() {
    let (a, b, rate) = (0.9, -0.5, 1.5);
    let p = scalar(a, b, 1.0);
    let sd = p.spectral().unwrap();
    let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
    let f = log_moment_condition(&bp, &cp(1, rate), &sd, 400_000, 3).unwrap();
    let h = 1e-4;
    let mut acc = 0.0;
    let mut x = -12.0;
    while x < 12.0 {
        acc += (a * a * x * x).ln_1p() * (-0.5 * x * x).exp() * h;
        x += h;
    }
    let exact = rate * acc / (2.0 * std::f64::consts::PI).sqrt();
    assert!((f.lhs - exact).abs() < 4.0 * f.se, "{} vs {exact} (se {})", f.lhs, f.se);
    assert_relative_eq!(f.threshold, -2.0 * b);
}

#[test]
fn huge_rate_is_violated() {
    let p = params2();
    let sd = p.spectral().unwrap();
    let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
    assert_eq!(log_moment_condition(&bp, &cp(2, 500.0), &sd, 20_000, 2).unwrap().verdict, Verdict::Violated);
    let ks = k_moment_conditions(&bp, &cp(2, 500.0), &sd, &[1, 2], 20_000, 2).unwrap();
    assert!(ks.iter().all(|f| f.verdict == Verdict::Violated));
    assert!(k_moment_conditions(&bp, &cp(2, 1.0), &sd, &[0], 100, 2).is_err());
}

#[test]
fn truncated_driver_is_flagged() {
    let p = params2();
    let spec = LevySpec::truncated_gtilde(2, EpsilonLaw::Exponential { mean: 0.5 }, Some(0.05));
    let opts = CheckOptions { n_mc: 20_000, ..CheckOptions::default() };
    let r = stationarity_report(&p, &spec, &opts).unwrap();
    assert!(r.log_moment.unwrap().truncated);
    assert!(!r.notes.is_empty());
}

#[test]
fn spectral_check_examples() {
    let ops = KronOperators::build(&Mat::zeros(2, 2), &-identity(2), 1.0, 1.0);
    let f = spectral_check(&-identity(2), &ops);
    assert_relative_eq!(f.max_re_b, -1.0, max_relative = 1e-12);
    assert_relative_eq!(f.max_re_curly_b, -2.0, max_relative = 1e-12);
    assert_relative_eq!(f.max_re_curly_c, -4.0, max_relative = 1e-12);
    assert!(f.all_stable() && f.curly_b_invertible && f.curly_c_invertible);

    let (a, b, sl, rl) = (0.7, -1.1, 1.3, 2.1);
    let ops = KronOperators::build(&Mat::from_element(1, 1, a), &Mat::from_element(1, 1, b), sl, rl);
    let f = spectral_check(&Mat::from_element(1, 1, b), &ops);
    assert_relative_eq!(f.max_re_curly_b, 2.0 * b + sl * a * a, max_relative = 1e-12);
    assert_relative_eq!(f.max_re_curly_c, 4.0 * b + 2.0 * sl * a * a + 3.0 * rl * a.powi(4), max_relative = 1e-12);
}

#[test]
fn quartic_norm_condition_unitary_cases() {
    let one = KronOperators::build(&Mat::from_element(1, 1, 0.5), &Mat::from_element(1, 1, -1.0), 1.0, 1.0);
    let sd1 = SpectralData::diagonalize(&Mat::from_element(1, 1, -1.0)).unwrap();
    let q = quartic_norm_condition(&one, &sd1, 1.0).unwrap();
    assert_eq!((q.lhs, q.rhs, q.holds), (3.0, 3.0, true));

    let ops2 = KronOperators::build(&identity(2), &-identity(2), 1.0, 1.0);
    let sd2 = SpectralData::diagonalize(&-identity(2)).unwrap();
    let q2 = quartic_norm_condition(&ops2, &sd2, 1.0).unwrap();
    // entries of I_4 + K_2 + vec(I) vec(I)^T: two 3s and six 1s
    assert_relative_eq!(q2.rhs, 24f64.sqrt(), max_relative = 1e-12);
    assert!(q2.rhs >= 12f64.sqrt() && 12f64.sqrt() > 3.0 && q2.lhs <= 3.0 + 1e-12 && q2.holds);

    let b3 = Mat::from_row_slice(3, 3, &[-1.0, 0.3, 0.0, 0.3, -2.0, 0.1, 0.0, 0.1, -1.5]);
    let ops3 = KronOperators::build(&identity(3), &b3, 1.0, 1.0);
    let sd3 = SpectralData::diagonalize(&b3).unwrap();
    assert!(sd3.is_unitary());
    let q3 = quartic_norm_condition(&ops3, &sd3, 1.0).unwrap();
    assert!(q3.holds && q3.rhs >= 3.0 - 1e-12);
}

#[test]
fn report_for_defective_b_keeps_spectral_checks() {
    let beta = 0.5 * (10.0f64 / 9.0).ln();
    let b = Mat::from_row_slice(2, 2, &[-beta, 0.0, 1.0, -beta]);
    let p = ModelParams::new(params2().a().clone(), b, identity(2)).unwrap();
    let r = stationarity_report(&p, &cp(2, 1.0), &CheckOptions { n_mc: 1000, ..CheckOptions::default() }).unwrap();
    assert!(r.bound.is_none() && r.log_moment.is_none());
    assert!(r.spectral.max_re_b < 0.0);
    assert!(r.notes[0].contains("not diagonalizable"));
    assert!(r.to_key_value().contains("spectral.max_re_curly_c"));
}

#[test]
fn report_is_deterministic_and_serializable() {
    let opts = CheckOptions { n_mc: 10_000, seed: 5, ..CheckOptions::default() };
    let a = stationarity_report(&params2(), &cp(2, 1.0), &opts).unwrap();
    let b = stationarity_report(&params2(), &cp(2, 1.0), &opts).unwrap();
    assert_eq!(a.to_key_value(), b.to_key_value());
    let json = serde_json::to_string(&a).unwrap();
    assert!(json.contains("\"verdict\":\"SATISFIED\""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Integrals of ((1+u)^k - 1) / k grow with k, so SATISFIED at k must
    /// never coexist with VIOLATED at a smaller k, and the k = 1 verdict
    /// implies a stable mean generator.
    #[test]
    fn k_verdicts_are_monotone_and_imply_stable_curly_b(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_diagonalizable(&mut rng, 2);
        let a = Mat::from_fn(2, 2, |_, _| rng.random_range(-0.8..0.8));
        let p = ModelParams::new(a, b, identity(2)).unwrap();
        let spec = cp(2, rng.random_range(0.2..3.0));
        let sd = p.spectral().unwrap();
        let bp = BoundParams::new(&p, &sd, SubstitutionMode::Exact).unwrap();
        let fr = k_moment_conditions(&bp, &spec, &sd, &[1, 2, 3, 4], 4000, seed).unwrap();
        for w in fr.windows(2) {
            prop_assert!(w[0].lhs / w[0].k as f64 <= w[1].lhs / w[1].k as f64 * (1.0 + 1e-12));
            prop_assert!(!(w[1].verdict == Verdict::Satisfied && w[0].verdict != Verdict::Satisfied));
            prop_assert!(!(w[0].verdict == Verdict::Violated && w[1].verdict != Verdict::Violated));
        }
        if fr[0].verdict == Verdict::Satisfied {
            let ops = p.operators(&spec).unwrap();
            prop_assert!(spectral_check(p.b(), &ops).max_re_curly_b < 0.0);
        }
    }
}
