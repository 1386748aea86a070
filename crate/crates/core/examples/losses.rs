//! Softmax, entropy and the regularized loss on a single prediction.
//!
//!     cargo run --example losses

use mer::losses::{
    cell_function, cross_entropy, entropy, label_smoothing_gradient, label_smoothing_loss,
    regularized_gradient, regularized_loss, softmax, ClassLabel, LogitVector,
};

fn main() -> mer::Result<()> {
    let logits = LogitVector::new(vec![2.0, 0.5, -1.0, 0.0])?;
    let label = ClassLabel::new(0);
    let p = softmax(&logits);
    println!("p        = {:.4?}", p.as_slice());
    println!("CE       = {:.4}", cross_entropy(&p, label)?);
    println!(
        "H        = {:.4} (max {:.4})",
        entropy(&p),
        (p.len() as f64).ln()
    );

    for lambda in [0.0, 0.5, 1.0] {
        let loss = regularized_loss(&p, label, lambda)?;
        let grad = regularized_gradient(&p, label, lambda)?;
        println!(
            "λ={lambda}: total {:.4}, f(p_y) {:.4}, ∂/∂z {:.4?}",
            loss.total,
            cell_function(p.as_slice()[0], &p, lambda)?,
            grad.as_slice()
        );
    }

    let ls = 0.1;
    println!(
        "label smoothing λ={ls}: loss {:.4}, ∂/∂z {:.4?}",
        label_smoothing_loss(&p, label, ls)?,
        label_smoothing_gradient(&p, label, ls)?.as_slice()
    );
    Ok(())
}
