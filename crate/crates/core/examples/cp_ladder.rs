//! Sup-distance of compound Poisson truncations to the finest one.

use mucogarch::kronalg::Mat;
use mucogarch::levy::{EpsilonLaw, LevySpec};
use mucogarch::sim::{cp_approximation_ladder, regular_grid, ModelParams};

fn main() -> mucogarch::Result<()> {
    let params = ModelParams::new(Mat::identity(2, 2) * 0.5, Mat::identity(2, 2) * -1.0, Mat::identity(2, 2))?;
    let levy = LevySpec::truncated_gtilde(2, EpsilonLaw::Gamma { shape: 0.5, scale: 2.0 }, None);
    let eps: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
    let grid = regular_grid(5.0, 0.05)?;
    let r = cp_approximation_ladder(&params, &levy, &grid, &eps, 3, 0, &Mat::zeros(2, 2))?;
    for ((e, d), n) in r.eps.iter().zip(&r.distances).zip(&r.jump_counts) {
        println!("{e:>12.6} {d:>14.6e} {n:>6}");
    }
    println!("monotone: {}", r.is_monotone(1e-12));
    Ok(())
}
