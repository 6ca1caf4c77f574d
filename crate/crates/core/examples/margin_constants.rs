//! Randomised check of the margin transfer constants for the three margin kinds.

use genbound::experiments::verify_margin_constants;
use genbound::margins::MarginModel;
use genbound::Workers;

fn main() -> genbound::Result<()> {
    let models = [
        MarginModel::binary(1.0)?,
        MarginModel::squared_ml(2.0, vec![-2.0, 0.0, 2.0])?,
        MarginModel::softmax(1.0, 5)?,
    ];
    for m in &models {
        let r = verify_margin_constants(m, 50_000, 1, Workers::default())?;
        println!(
            "{:?}: A = {}, max ratio {:.6}, holds {}",
            r.kind, r.transfer_constant, r.max_ratio, r.holds
        );
    }
    Ok(())
}
