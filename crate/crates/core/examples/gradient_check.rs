//! Finite-difference check of every differentiable op and the three models.

use stpgsr::diagnostics::{model_suite, op_suite};

fn main() -> stpgsr::Result<()> {
    let mut results = op_suite(1)?;
    results.extend(model_suite(1)?);
    for r in &results {
        println!("{:<40} {:.2e} (< {:.0e}) {}", r.name, r.max_rel_error, r.threshold, if r.passed() { "ok" } else { "FAIL" });
    }
    Ok(())
}
