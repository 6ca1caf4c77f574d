//! Per-layer norms, α factors and the closed-form complexity bound.

use genbound::complexity::bound_theorem_terms;
use genbound::network::{Activation, NetworkSpec};
use nalgebra::DMatrix;

fn main() -> genbound::Result<()> {
    let net = NetworkSpec::new(
        vec![2, 3, 1],
        vec![
            DMatrix::from_row_slice(3, 3, &[0.2, -0.1, 0.3, 0.1, 0.2, -0.2, 0.05, 0.0, 0.1]),
            DMatrix::from_row_slice(3, 1, &[0.5, -0.25, 0.4]),
        ],
        vec![Activation::relu(), Activation::sigmoid()],
    )?;
    for l in 1..=net.depth() {
        println!("layer {l}: alpha = {}", net.alpha(l)?);
    }
    println!("product of alphas: {}", net.alpha_product());
    for n in [100, 1_000, 10_000] {
        let t = bound_theorem_terms(&net, n, 0.0)?;
        println!(
            "n = {n:>6}: leading {:.6}, offset {:.6}, total {:.6}",
            t.leading_term, t.offset_term, t.value
        );
    }
    Ok(())
}
