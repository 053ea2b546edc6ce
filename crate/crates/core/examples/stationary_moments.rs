use mucogarch::kronalg::{unvec, Mat};
use mucogarch::levy::{EpsilonLaw, LevySpec};
use mucogarch::moments::analytic_report;
use mucogarch::sim::ModelParams;

fn main() -> mucogarch::Result<()> {
    let params = ModelParams::new(
        Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.05, 0.35]),
        Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -1.5]),
        Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
    )?;
    let levy = LevySpec::compound_poisson(2, 1.0, EpsilonLaw::Constant { value: 1.0 });
    let ops = params.operators(&levy)?;
    let r = analytic_report(&ops, params.c(), levy.sigma_w, 1.0, &[0.5, 1.0, 2.0])?;
    println!("E Y = {}", unvec(&r.mean_y)?);
    println!("E V = {}", unvec(&r.mean_v)?);
    println!("var vec Y = {}", r.var_y);
    for (h, a) in &r.acov {
        println!("acov({h}) = {a}");
    }
    Ok(())
}
