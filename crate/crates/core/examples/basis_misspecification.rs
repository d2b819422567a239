//! Fit a Fourier-series vector field to noisy data with and without the
//! frequency that generated part of the truth, and compare how far each
//! estimated tensor field lands from the true one.
//!
//! cargo run --example basis_misspecification -- [cells] [seed]

use std::sync::Arc;

use fvgmrf::coefficients::{AnisotropySpec, FrequencySet, KappaSpec, ParamLayout};
use fvgmrf::fixtures::wavy_vector_field;
use fvgmrf::grid::GridSpec;
use fvgmrf::inference::{
    h_discrepancy, map_estimate, simulate_observation, DatasetSeed, LatentModel, MapOptions, ObservationTemplate,
    Posterior,
};

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(50, |s| s.parse().expect("cells"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let side = 20.0;
    let grid = GridSpec::square(side, cells)?;
    let kappa = KappaSpec::new(1.0)?;
    let truth = AnisotropySpec::new(1.0, wavy_vector_field(side, side))?;
    let full = ParamLayout::fourier(side, side, FrequencySet::new([(0, 1), (1, 0), (1, 1)])?);
    let generator = LatentModel::new(grid, kappa, full.clone())?;
    let factor = generator.precision_factor(&full.pack(&truth)?)?;
    let template = ObservationTemplate::Noisy { noise_precision: 400.0, cells: None };
    let obs = simulate_observation(&factor, &template, DatasetSeed { seed, stream: 0 })?;

    for (label, freqs) in [("partial", vec![(0, 1), (1, 0)]), ("full", vec![(0, 1), (1, 0), (1, 1)])] {
        let layout = ParamLayout::fourier(side, side, FrequencySet::new(freqs)?);
        let mut start = vec![1.0, 2.0, 3.0];
        start.resize(layout.len(), 0.0);
        let model = Arc::new(LatentModel::new(grid, kappa, layout)?);
        let posterior = Posterior::new(Arc::clone(&model), obs.clone())?;
        let fit = map_estimate(&posterior, &start, &MapOptions { information: false, ..MapOptions::default() })?;
        let d = h_discrepancy(&truth, &model.spec(&fit.theta)?, &grid);
        println!(
            "{label:>7}: {} parameters, gamma {:.3}, log posterior {:.2}, discrepancy {d:.3}, converged {}",
            model.num_params(),
            fit.theta[0],
            fit.log_post,
            fit.converged
        );
    }
    Ok(())
}
