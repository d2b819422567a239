//! Repeated simulate-and-refit study for the constant-field model: bias and
//! spread of the estimates over many datasets.
//!
//! cargo run --example simulation_study -- [cells] [datasets] [seed] [out.json]

use std::sync::Arc;

use fvgmrf::coefficients::{KappaSpec, ParamLayout};
use fvgmrf::grid::GridSpec;
use fvgmrf::inference::{simulation_study, LatentModel, MapOptions, ObservationTemplate};

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(50, |s| s.parse().expect("cells"));
    let datasets: usize = args.next().map_or(20, |s| s.parse().expect("datasets"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let out = args.next();

    let model =
        Arc::new(LatentModel::new(GridSpec::square(20.0, cells)?, KappaSpec::new(1.0)?, ParamLayout::Constant)?);
    let truth = [3.0, 0.5f64.sqrt(), 1.5f64.sqrt()];
    let study = simulation_study(&model, &truth, &ObservationTemplate::Exact, datasets, seed, &MapOptions::default())?;

    println!("{} datasets, {} failed", study.datasets, study.failures);
    println!("{:>6} {:>8} {:>9} {:>9} {:>9}", "param", "truth", "mean", "bias", "sd");
    for k in 0..truth.len() {
        println!(
            "{:>6} {:>8.4} {:>9.4} {:>9.4} {:>9.4}",
            study.names[k], study.true_theta[k], study.mean[k], study.bias[k], study.sample_sd[k]
        );
    }
    if let Some(path) = out {
        std::fs::write(&path, serde_json::to_string_pretty(&study).expect("serializable"))?;
        println!("wrote {path}");
    }
    Ok(())
}
