use mucogarch::sim::counterexample;

fn main() -> mucogarch::Result<()> {
    let r = counterexample()?;
    println!("e^B = {}", r.exp_b);
    println!("V_1 = {}", r.v1);
    println!("x' V_1 x = {} (min eigenvalue {})", r.quadratic_form, r.min_eigenvalue);
    Ok(())
}
