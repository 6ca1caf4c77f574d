//! Repeated-sampling coverage of the i.i.d. bound over a small class.

use genbound::experiments::{coverage_experiment, Atom, CoverageConfig, DataSource, DistSpec};
use genbound::margins::MarginModel;
use genbound::network::{Activation, NetworkSpec};
use genbound::Workers;
use nalgebra::DMatrix;

fn main() -> genbound::Result<()> {
    let atoms = vec![
        Atom {
            x: vec![0.2],
            label: 0,
            weight: 0.45,
        },
        Atom {
            x: vec![0.2],
            label: 1,
            weight: 0.05,
        },
        Atom {
            x: vec![0.8],
            label: 1,
            weight: 0.45,
        },
        Atom {
            x: vec![0.8],
            label: 0,
            weight: 0.05,
        },
    ];
    let nets = [0.3, 0.5, 0.7]
        .iter()
        .map(|&t| {
            let c = 1.0 / (1.0 + t);
            NetworkSpec::new(
                vec![1, 1],
                vec![DMatrix::from_row_slice(2, 1, &[c, -c * t])],
                vec![Activation::identity()],
            )?
            .with_norm_cap(1, 1.0)
        })
        .collect::<genbound::Result<Vec<_>>>()?;
    let mut cfg = CoverageConfig::new(
        DataSource::Iid(DistSpec::Finite { atoms }),
        nets,
        MarginModel::binary(1.0)?,
        1000,
    );
    cfg.trials = 200;
    let r = coverage_experiment(&cfg, Workers::default())?;
    println!("true risks {:?}", r.true_risks);
    println!(
        "{} / {} violations, mean slack {:.3}, tolerance {:.4}",
        r.violations, r.trials, r.mean_slack, r.tolerance
    );
    Ok(())
}
