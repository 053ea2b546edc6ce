//! Runs the univariate bound next to `||vec Y_t||_{B,S}` on one jump stream.

use mucogarch::bounds::{bound_process, BoundParams, SubstitutionMode};
use mucogarch::kronalg::{bs_norm_vec, vec, Mat};
use mucogarch::levy::{sample_jumps, tilde_l_jumps, EpsilonLaw, LevySpec};
use mucogarch::sim::{regular_grid, simulate_with_stream, ModelParams};

fn main() -> mucogarch::Result<()> {
    let params = ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.25]),
        Mat::from_row_slice(2, 2, &[-0.8, 0.5, 0.1, -1.2]),
        Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
    )?;
    let sd = params.spectral()?;
    let levy = LevySpec::compound_poisson(2, 2.0, EpsilonLaw::Exponential { mean: 1.0 });
    let jumps = sample_jumps(&levy, 10.0, 5)?;
    let grid = regular_grid(10.0, 0.5)?;
    let y0 = Mat::zeros(2, 2);
    let path = simulate_with_stream(&params, &jumps, &grid, &y0)?;
    let bp = BoundParams::new(&params, &sd, SubstitutionMode::Exact)?;
    let bound = bound_process(&bp, &tilde_l_jumps(&jumps, &sd)?, 0.0, &grid)?;
    println!("t,norm,bound");
    for (k, t) in grid.iter().enumerate() {
        println!("{t},{},{}", bs_norm_vec(&vec(&path.y[k]), &sd)?, bound.values[k]);
    }
    Ok(())
}
