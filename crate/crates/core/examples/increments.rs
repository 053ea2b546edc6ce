//! Sample variance and lag-one autocovariance of the increments against
//! `(sigma_L + sigma_W) Delta E V` and zero.

use mucogarch::kronalg::{unvec, Mat};
use mucogarch::levy::{EpsilonLaw, LevySpec};
use mucogarch::moments::{increment_moments, stationary_mean, BatchStat, EmpiricalMoments, EmpiricalOptions};
use mucogarch::sim::{regular_grid, simulate_paths, InitialState, ModelParams, SimOptions};

fn main() -> mucogarch::Result<()> {
    let params = ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.05, 0.35]),
        Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -1.5]),
        Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
    )?;
    let levy = LevySpec::compound_poisson(2, 1.0, EpsilonLaw::Constant { value: 1.0 });
    let grid = regular_grid(500.0, 0.25)?;
    let paths = simulate_paths(&params, &levy, &grid, 11, 4, &SimOptions::with_initial(InitialState::BurnIn { length: None }))?;
    let opts = EmpiricalOptions { batches_per_path: 10, delta: 1.0, inc_lags: vec![1], ..Default::default() };
    let emp = EmpiricalMoments::estimate(&paths, &opts)?;

    let ops = params.operators(&levy)?;
    let st = stationary_mean(&ops, params.c())?;
    let inc = increment_moments(&ops, params.c(), 0.0, 1.0, &st.mean_v)?;
    let var = BatchStat::from_batches(&emp.inc_var)?;
    println!("E V          = {}", unvec(&st.mean_v)?);
    println!("var G (model) = {}", inc.var);
    println!("var G (data)  = {} +/- {}", var.mean, var.se);
    let lag1 = BatchStat::from_batches(emp.inc_acov_at(1).expect("lag requested"))?;
    println!("acov G(1)     = {} +/- {}", lag1.mean, lag1.se);
    Ok(())
}
