//! Recover `(gamma, beta)` when the direction of anisotropy is known and
//! only its strength is estimated.
//!
//! cargo run --example fixed_field_fit -- [cells] [seed]

use std::sync::Arc;

use fvgmrf::coefficients::{KappaSpec, ParamLayout};
use fvgmrf::fixtures::swirl_base_field;
use fvgmrf::gmrf::sample;
use fvgmrf::grid::GridSpec;
use fvgmrf::inference::{map_estimate, LatentModel, MapOptions, ObservationModel, Posterior};

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(100, |s| s.parse().expect("cells"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let grid = GridSpec::square(20.0, cells)?;
    let layout = ParamLayout::FixedField(swirl_base_field(20.0, 20.0));
    let model = Arc::new(LatentModel::new(grid, KappaSpec::new(1.0)?, layout)?);
    let truth = [0.5, 5.0];
    let u = sample(&model.precision_factor(&truth)?, seed).values;
    let posterior = Posterior::new(Arc::clone(&model), ObservationModel::exact(u))?;

    let fit = map_estimate(&posterior, &[1.0, 1.0], &MapOptions::default())?;
    let sds = fit.std_devs.clone().unwrap_or_default();
    for (k, name) in model.layout().names().iter().enumerate() {
        println!(
            "{name:>6} truth {:>6.3} estimate {:>8.4} sd {:>7.4}",
            truth[k],
            fit.theta[k],
            sds.get(k).copied().unwrap_or(f64::NAN)
        );
    }
    println!("{}", fit.to_json());
    Ok(())
}
