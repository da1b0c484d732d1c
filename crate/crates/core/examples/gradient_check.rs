//! Finite-difference check of every parameter of the default model.
//!
//!     cargo run --release --example gradient_check

use stlstm::model::gradcheck::{full_model_grad_check, GradSuiteConfig};

fn main() -> stlstm::Result<()> {
    let out = full_model_grad_check(&GradSuiteConfig::default())?;
    println!(
        "{} parameters, loss {:.6}, max relative error {:.3e} ({}), {:.1?}",
        out.n_scalars,
        out.loss,
        out.report.max_rel_error,
        out.worst_name(),
        out.elapsed
    );
    for (name, err) in out.names.iter().zip(&out.report.per_param) {
        println!("  {name:<24} {err:.3e}");
    }
    println!("{}", if out.passed { "PASS" } else { "FAIL" });
    Ok(())
}
