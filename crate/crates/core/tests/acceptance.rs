//! One line per acceptance criterion; exits non-zero if any fails.
//! Tolerances and budgets live in `mucogarch::cli::validation`.

use mucogarch::cli::validation::{Settings, Suite, CRITERIA};

fn main() {
    let suite = Suite::new(Settings::default());
    let mut failed = Vec::new();
    for (id, name) in CRITERIA {
        match suite.run(id) {
            Ok(o) => {
                println!("{o}");
                if !o.passed {
                    failed.push(name);
                }
            }
            Err(e) => {
                println!("[FAIL] {id:>2} {name:<22} internal error: {e}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", CRITERIA.len(), CRITERIA.len());
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
