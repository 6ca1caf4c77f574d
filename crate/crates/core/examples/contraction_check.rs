//! Both contraction inequalities on random small instances.

use genbound::experiments::{contraction_instance_dnn, contraction_instance_highdim};
use genbound::Workers;

fn main() -> genbound::Result<()> {
    for seed in 0..5 {
        let a = contraction_instance_highdim(seed, Workers::default())?;
        let b = contraction_instance_dnn(seed, Workers::default())?;
        println!(
            "seed {seed}: vector-valued {:.4} <= {:.4} ({}), layer-wise {:.4} <= {:.4} ({})",
            a.lhs, a.rhs, a.holds, b.lhs, b.rhs, b.holds
        );
    }
    Ok(())
}
