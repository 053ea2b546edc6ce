//! A stable, non-normal `B` for which the process without jumps leaves the
//! positive semidefinite cone when started below `C`.

use crate::error::Result;
use crate::kronalg::{identity, matrix_exp, min_eigenvalue, Mat, Vector};

use super::{deterministic_flow_v, run, ModelParams};

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub b: Mat,
    pub exp_b: Mat,
    /// `sqrt(9/10) [[1, 0], [1, 1]]`.
    pub exp_b_expected: Mat,
    pub v0: Mat,
    pub v1: Mat,
    pub x: Vector,
    pub quadratic_form: f64,
    pub min_eigenvalue: f64,
}

fn params() -> ModelParams {
    let beta = 0.5 * (10.0f64 / 9.0).ln();
    let b = Mat::from_row_slice(2, 2, &[-beta, 0.0, 1.0, -beta]);
    ModelParams::new(Mat::zeros(2, 2), b, identity(2) * 2.0).expect("fixed parameters are valid")
}

/// `C = 2 I`, `V_0 = I / 2`, `B = [[-ln(10/9)/2, 0], [1, -ln(10/9)/2]]`, `t = 1`, `x = (1, 1)`.
pub fn counterexample() -> Result<CounterexampleReport> {
    let p = params();
    let v0 = identity(2) * 0.5;
    let v1 = deterministic_flow_v(&v0, &p, 1.0)?;
    let x = Vector::from_vec(vec![1.0, 1.0]);
    let quadratic_form = (x.transpose() * &v1 * &x)[(0, 0)];
    let r = 0.9f64.sqrt();
    Ok(CounterexampleReport {
        b: p.b().clone(),
        exp_b: matrix_exp(p.b(), 1.0)?,
        exp_b_expected: Mat::from_row_slice(2, 2, &[r, 0.0, r, r]),
        min_eigenvalue: min_eigenvalue(&v1),
        v0,
        v1,
        x,
        quadratic_form,
    })
}

/// `V_1` of the same example produced by the path simulator with the
/// positivity guard switched off.
pub fn simulated_counterexample_v1() -> Result<Mat> {
    let p = params();
    let y0 = identity(2) * 0.5 - p.c();
    let path = run(&p, y0, &[0.0, 1.0], &[], None, false)?;
    Ok(path.v[1].clone())
}
