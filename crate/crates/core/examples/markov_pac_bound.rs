//! Margin bound from a single Markov trajectory.

use genbound::bounds::{markov_pac_bound, BoundSettings, MarkovTerms, RademacherInput};
use genbound::experiments::{generate_markov_dataset, true_risk, RiskLaw, StateEmbedding};
use genbound::margins::MarginModel;
use genbound::markov::{analyze, AnalysisOptions, ChainModel};
use genbound::network::{Activation, NetworkSpec};
use nalgebra::DMatrix;

fn main() -> genbound::Result<()> {
    let chain = ChainModel::from_rows(
        &[
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
        ],
        Some(vec![1.0, 0.0, 0.0]),
    )?;
    let embedding = StateEmbedding::new(vec![(vec![0.1], 0), (vec![0.5], 1), (vec![0.9], 1)])?;
    let net = NetworkSpec::new(
        vec![1, 1],
        vec![DMatrix::from_row_slice(2, 1, &[0.7, -0.21])],
        vec![Activation::identity()],
    )?
    .with_norm_cap(1, 1.0)?;
    let model = MarginModel::binary(1.0)?;
    let analysis = analyze(&chain, &AnalysisOptions::default())?;
    let data = generate_markov_dataset(&chain, &embedding, 20_000, 11)?;
    let margins = data.margins(&net, &model)?;
    let r = markov_pac_bound(
        &margins,
        &net,
        &model,
        RademacherInput::closed_form(&net, margins.len(), 0.0)?,
        &BoundSettings::default(),
        MarkovTerms::from_analysis(&analysis, 1.0),
    )?;
    println!(
        "tau_min {:.3}, lambda {:.3}",
        analysis.tau_min, analysis.lambda
    );
    println!(
        "bound {:.4} (extra term {:.4})",
        r.bound_value, r.markov_extra_term
    );
    println!(
        "stationary risk {:.4}",
        true_risk(&net, &model, RiskLaw::Stationary(&chain, &embedding))?
    );
    Ok(())
}
