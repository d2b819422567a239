//! A flexible Fourier vector field fitted to a realization of a constant
//! field from several starting points. Different starts can stop at
//! different local maxima.
//!
//! cargo run --example multistart -- [cells] [seed]

use std::sync::Arc;

use fvgmrf::coefficients::{FrequencySet, KappaSpec, ParamLayout};
use fvgmrf::gmrf::sample;
use fvgmrf::grid::GridSpec;
use fvgmrf::inference::{multistart_diagnostics, LatentModel, MapOptions, ObservationModel, Posterior};

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(50, |s| s.parse().expect("cells"));
    let seed: u64 = args.next().map_or(11, |s| s.parse().expect("seed"));

    let side = 20.0;
    let freqs = FrequencySet::new([(0, 1), (1, -1), (1, 0), (1, 1)])?;
    let layout = ParamLayout::fourier(side, side, freqs);
    let p = layout.len();
    let model = Arc::new(LatentModel::new(GridSpec::square(side, cells)?, KappaSpec::new(1.0)?, layout)?);

    let mut truth = vec![3.0, 0.5f64.sqrt(), 1.5f64.sqrt()];
    truth.resize(p, 0.0);
    let u = sample(&model.precision_factor(&truth)?, seed).values;
    let posterior = Posterior::new(Arc::clone(&model), ObservationModel::exact(u))?;

    let mut flat = vec![3.0];
    flat.resize(p, 0.1);
    let mut constant = vec![3.0, 0.1, 0.1];
    constant.resize(p, 0.0);
    let mut near = truth.clone();
    near.iter_mut().skip(3).for_each(|x| *x = 0.01);

    let fits = multistart_diagnostics(
        &posterior,
        &[flat, constant, near],
        &MapOptions { information: false, ..Default::default() },
    )?;
    println!("{:>12} {:>8} {:>9} {:>6}", "log post", "gamma", "|v0|", "evals");
    for fit in &fits {
        let v0 = fit.theta[1].hypot(fit.theta[2]);
        println!("{:>12.3} {:>8.3} {:>9.3} {:>6}", fit.log_post, fit.theta[0], v0, fit.evals);
    }
    Ok(())
}
