//! The λ → converged true-class probability curve for a few class counts,
//! plus the inverse mapping used to pick λ for a target probability.
//!
//!     cargo run --example convergence_curve [out.csv]

use mer::convergence::{
    converged_distribution, curve, lambda_for_cpp, log_spaced, ls_lambda_for_cpp,
};
use mer::harness::write_curve;

fn main() -> mer::Result<()> {
    let lambdas = log_spaced(0.05, 5.0, 9)?;
    let classes = [10, 200, 3665];
    let points = curve(&lambdas, &classes)?;

    print!("{:>8}", "λ");
    for c in classes {
        print!("{:>12}", format!("C={c}"));
    }
    println!();
    for (i, l) in lambdas.iter().enumerate() {
        print!("{l:>8.3}");
        for k in 0..classes.len() {
            print!("{:>11.2}%", 100.0 * points[k * lambdas.len() + i].cpp);
        }
        println!();
    }

    let d = converged_distribution(0.5, 200)?;
    println!(
        "\nλ=0.5, C=200 converges to p_y={:.4}, each negative {:.3e} (total mass {:.12})",
        d.positive,
        d.negative,
        d.total_mass()
    );
    for cpp in [0.24, 0.41, 0.77, 0.90] {
        println!(
            "target {:.0}% at C=200: λ_MER {:.3}, λ_LS {:.2}",
            100.0 * cpp,
            lambda_for_cpp(cpp, 200)?,
            ls_lambda_for_cpp(cpp, 200, false)?
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        let file =
            std::fs::File::create(&path).map_err(|e| mer::Error::Validation(e.to_string()))?;
        write_curve(&points, file)?;
        println!("wrote {path}");
    }
    Ok(())
}
