//! Simulates one bivariate path and writes it as CSV to stdout.

use mucogarch::kronalg::Mat;
use mucogarch::levy::{EpsilonLaw, LevySpec};
use mucogarch::sim::{regular_grid, simulate_path, write_path_csv, InitialState, ModelParams, SimOptions};

fn main() -> mucogarch::Result<()> {
    let params = ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.05, 0.35]),
        Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -1.5]),
        Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
    )?;
    let levy = LevySpec::compound_poisson(2, 1.0, EpsilonLaw::Exponential { mean: 1.0 }).with_sigma_w(0.5);
    let grid = regular_grid(20.0, 0.125)?;
    let opts = SimOptions::with_initial(InitialState::BurnIn { length: None });
    let path = simulate_path(&params, &levy, &grid, 42, &opts)?;
    eprintln!("{} jumps", path.jumps.len());
    write_path_csv(&path, std::io::stdout().lock())
}
