//! Prints the stationarity report in both substitution modes.

use mucogarch::bounds::{stationarity_report, CheckOptions, SubstitutionMode};
use mucogarch::kronalg::Mat;
use mucogarch::levy::{EpsilonLaw, LevySpec};
use mucogarch::sim::ModelParams;

fn main() -> mucogarch::Result<()> {
    // non-normal B, so the two modes differ
    let params = ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.3]),
        Mat::from_row_slice(2, 2, &[-1.0, 0.6, 0.0, -1.4]),
        Mat::identity(2, 2),
    )?;
    let levy = LevySpec::compound_poisson(2, 1.5, EpsilonLaw::Gamma { shape: 2.0, scale: 0.5 });
    for mode in [SubstitutionMode::Exact, SubstitutionMode::Safe] {
        let opts = CheckOptions { mode, ks: vec![1, 2, 4], n_mc: 200_000, seed: 1 };
        println!("{}", stationarity_report(&params, &levy, &opts)?.to_key_value());
    }
    Ok(())
}
