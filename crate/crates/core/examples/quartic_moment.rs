use mucogarch::kronalg::{commutation_matrix, identity, vec};
use mucogarch::levy::{empirical_quartic_matrix, EpsilonLaw, LevySpec};

fn main() -> mucogarch::Result<()> {
    let levy = LevySpec::compound_poisson(2, 1.0, EpsilonLaw::Constant { value: 1.0 });
    let est = empirical_quartic_matrix(&levy, 1.0, 50_000, 8)?;
    let vi = vec(&identity(2));
    let target = identity(4) + commutation_matrix(2) + &vi * vi.transpose();
    println!("estimate {}", est.mean);
    println!("target {}", target);
    println!("max |error| / se = {:.2}", (&est.mean - &target).component_div(&est.se.map(|s| s.max(1e-300))).amax());
    Ok(())
}
