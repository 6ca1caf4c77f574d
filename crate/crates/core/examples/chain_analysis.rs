//! Spectral gap, mixing time and the ergodic-average MSE bound of a chain.

use genbound::markov::{analyze, AnalysisOptions, ChainModel};

fn main() -> genbound::Result<()> {
    let chain = ChainModel::two_state(0.3, 0.2, Some(vec![1.0, 0.0]))?;
    let a = analyze(&chain, &AnalysisOptions::default())?;
    println!("pi = {:?}", a.pi);
    println!(
        "lambda = {}, absolute spectral gap = {}",
        a.lambda, a.gamma_star
    );
    let (lo, hi) = a.mixing_sandwich();
    println!(
        "t_mix = {} in [{lo:.3}, {hi:.3}], tau_min = {:.3}",
        a.t_mix, a.tau_min
    );
    println!("chi norm = {:.4}", a.chi_norm);
    for n in [100, 1_000, 10_000] {
        println!("n = {n:>6}: MSE bound {:.6}", a.mse_bound(n, 0, 1.0)?);
    }
    Ok(())
}
