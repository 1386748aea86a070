//! Numerically minimizes the per-sample objective over the simplex and
//! compares the optimum with the closed form.
//!
//!     cargo run --release --example simplex_oracle

use mer::convergence::{cpp_for_lambda, simplex_oracle, OracleOptions};
use mer::losses::ClassLabel;

fn main() -> mer::Result<()> {
    println!(
        "{:>4} {:>6} {:>12} {:>12} {:>10}",
        "C", "λ", "oracle p_y", "closed form", "|diff|"
    );
    for c in [3, 10, 50] {
        for lambda in [0.1, 0.5, 2.0] {
            let opts = OracleOptions {
                jitter_seed: Some(7),
                ..OracleOptions::default()
            };
            let p = simplex_oracle(ClassLabel::new(0), lambda, c, opts)?;
            let closed = cpp_for_lambda(lambda, c)?;
            let py = p.as_slice()[0];
            println!(
                "{c:>4} {lambda:>6} {py:>12.8} {closed:>12.8} {:>10.2e}",
                (py - closed).abs()
            );
        }
    }
    Ok(())
}
