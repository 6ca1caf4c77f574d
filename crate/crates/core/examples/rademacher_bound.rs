//! Exact and Monte Carlo Rademacher averages of a small network class,
//! compared with the closed-form bound.

use genbound::complexity::{
    bound_theorem, estimate_rademacher, exact_rademacher, make_fplus, FiniteHypothesisTable,
    RademacherMode,
};
use genbound::network::{Activation, NetworkSpec};
use genbound::Workers;
use nalgebra::DMatrix;

fn main() -> genbound::Result<()> {
    let xs: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![i as f64 / 9.0, 1.0 - i as f64 / 18.0])
        .collect();
    let mut nets = Vec::new();
    for a in [-0.4, -0.1, 0.2, 0.5] {
        for b in [-0.3, 0.3] {
            let w = DMatrix::from_row_slice(3, 1, &[a, b, 0.1]);
            nets.push(
                NetworkSpec::new(vec![2, 1], vec![w], vec![Activation::relu()])?
                    .with_norm_cap(1, 1.0)?,
            );
        }
    }
    let table = make_fplus(&FiniteHypothesisTable::from_networks(&nets, &xs)?);
    let exact = exact_rademacher(&table, RademacherMode::SignedSup, Workers::default())?;
    let mc = estimate_rademacher(
        &table,
        RademacherMode::SignedSup,
        0,
        200_000,
        7,
        Workers::default(),
    )?;
    println!("exact      {:.6}", exact.value);
    println!("monte carlo {:.6} +/- {:.6}", mc.value, mc.std_error);
    println!("closed form {:.6}", bound_theorem(&nets[0], xs.len(), 0.0)?);
    Ok(())
}
