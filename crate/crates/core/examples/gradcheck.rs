//! Finite-difference checks of every differentiable operation and of a full
//! forward pass for each model variant.

use unignn::autodiff::gradcheck::{op_suite, DEFAULT_TOLERANCE};
use unignn::layers::gradcheck::model_suite;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut checks = op_suite(0)?;
    checks.extend(model_suite(0)?);
    for c in &checks {
        let status = if c.passed(DEFAULT_TOLERANCE) { "ok" } else { "FAILED" };
        println!("{:<28} {:.2e} {status}", c.name, c.max_rel_error);
    }
    let failed = checks.iter().filter(|c| !c.passed(DEFAULT_TOLERANCE)).count();
    println!("{} checks, {failed} above {DEFAULT_TOLERANCE:e}", checks.len());
    Ok(())
}
