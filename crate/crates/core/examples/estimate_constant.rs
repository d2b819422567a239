//! Simulate a stationary anisotropic field and recover `(gamma, v1, v2)`
//! from one exactly observed realization.
//!
//! cargo run --example estimate_constant -- [cells] [seed]

use std::sync::Arc;
use std::time::Instant;

use fvgmrf::coefficients::{KappaSpec, ParamLayout};
use fvgmrf::gmrf::sample;
use fvgmrf::grid::GridSpec;
use fvgmrf::inference::{map_estimate, LatentModel, MapOptions, ObservationModel, Posterior};

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(100, |s| s.parse().expect("cells"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let grid = GridSpec::square(20.0, cells)?;
    let model = Arc::new(LatentModel::new(grid, KappaSpec::new(1.0)?, ParamLayout::Constant)?);
    let truth = [3.0, 0.5f64.sqrt(), 1.5f64.sqrt()];
    let u = sample(&model.precision_factor(&truth)?, seed).values;
    let posterior = Posterior::new(Arc::clone(&model), ObservationModel::exact(u))?;

    let start = Instant::now();
    let fit = map_estimate(&posterior, &[1.0, 0.1, 0.1], &MapOptions::default())?;
    let elapsed = start.elapsed();

    let theta = if fit.theta[2] < 0.0 { model.layout().flip_sign(&fit.theta) } else { fit.theta.clone() };
    let sds = fit.std_devs.clone().unwrap_or_default();
    println!("{:>6} {:>9} {:>9} {:>9}", "param", "truth", "estimate", "sd");
    for (k, name) in model.layout().names().iter().enumerate() {
        println!("{name:>6} {:>9.4} {:>9.4} {:>9.4}", truth[k], theta[k], sds.get(k).copied().unwrap_or(f64::NAN));
    }
    println!(
        "log posterior {:.3}, converged {}, {} evaluations, {} iterations, {:.2?}",
        fit.log_post, fit.converged, fit.evals, fit.iterations, elapsed
    );
    Ok(())
}
