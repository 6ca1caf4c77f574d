//! Margin bound for a fixed linear classifier on an i.i.d. sample.

use genbound::bounds::{iid_pac_bound, BoundSettings, RademacherInput};
use genbound::experiments::{generate_iid, true_risk, Atom, DistSpec, RiskLaw};
use genbound::margins::MarginModel;
use genbound::network::{Activation, NetworkSpec};
use nalgebra::DMatrix;

fn main() -> genbound::Result<()> {
    let mut atoms = Vec::new();
    for i in 0..10 {
        let x = vec![(i as f64 + 0.5) / 10.0];
        let clean = usize::from(i >= 5);
        atoms.push(Atom {
            x: x.clone(),
            label: clean,
            weight: 0.095,
        });
        atoms.push(Atom {
            x,
            label: 1 - clean,
            weight: 0.005,
        });
    }
    let dist = DistSpec::Finite { atoms };
    let net = NetworkSpec::new(
        vec![1, 1],
        vec![DMatrix::from_row_slice(2, 1, &[4.0 / 3.0, -2.0 / 3.0])],
        vec![Activation::identity()],
    )?
    .with_norm_cap(1, 2.0)?;
    let model = MarginModel::binary(1.0)?;
    let data = generate_iid(&dist, 50_000, 3)?;
    let margins = data.margins(&net, &model)?;
    let r = iid_pac_bound(
        &margins,
        &net,
        &model,
        RademacherInput::closed_form(&net, margins.len(), 0.0)?,
        &BoundSettings::default(),
    )?;
    let best = r.best_terms();
    println!(
        "best gamma {}: risk {:.4}, complexity {:.4}, total {:.4}",
        best.gamma, best.empirical_margin_risk, best.complexity_term, best.total
    );
    println!(
        "bound {:.4}, true risk {:.4}",
        r.bound_value,
        true_risk(&net, &model, RiskLaw::Dist(&dist))?
    );
    Ok(())
}
