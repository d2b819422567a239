//! Repeated-simulation studies and multi-start diagnostics.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{map_estimate, FitResult, LatentModel, MapOptions, ObservationModel, Posterior};
use crate::error::{Error, Result};
use crate::gmrf::{sample_stream, PrecisionFactor};

/// How simulated data are observed.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationTemplate {
    Exact,
    /// i.i.d. noise on every cell, or on the listed cells only.
    Noisy {
        noise_precision: f64,
        cells: Option<Vec<usize>>,
    },
}

/// Seed and stream of one simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetSeed {
    pub seed: u64,
    pub stream: u64,
}

/// Draw `u` from `factor` and observe it through `template`. The noise uses
/// a stream disjoint from the one that drives `u`.
pub fn simulate_observation(
    factor: &PrecisionFactor,
    template: &ObservationTemplate,
    at: DatasetSeed,
) -> Result<ObservationModel> {
    let u = sample_stream(factor, at.seed, at.stream).values;
    match template {
        ObservationTemplate::Exact => Ok(ObservationModel::exact(u)),
        ObservationTemplate::Noisy { noise_precision, cells } => {
            let mut rng = ChaCha8Rng::seed_from_u64(at.seed);
            rng.set_stream(!at.stream);
            let sd = 1.0 / noise_precision.sqrt();
            let n = u.len();
            let picked: Vec<usize> = match cells {
                Some(c) => c.clone(),
                None => (0..n).collect(),
            };
            if picked.iter().any(|&c| c >= n) {
                return Err(Error::InvalidObservation("observed cell outside the grid".into()));
            }
            let y: Vec<f64> = picked
                .iter()
                .map(|&c| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    u[c] + sd * e
                })
                .collect();
            match cells {
                None => ObservationModel::noisy(y, *noise_precision),
                Some(_) => ObservationModel::noisy_selection(n, picked, y, *noise_precision),
            }
        }
    }
}

/// Summary of a simulation study. Statistics cover the successful fits only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub names: Vec<String>,
    pub true_theta: Vec<f64>,
    pub datasets: usize,
    /// Fits that errored or did not converge.
    pub failures: usize,
    pub failed: Vec<DatasetSeed>,
    pub mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub sample_sd: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
}

/// Simulate `n_datasets` datasets from `true_theta` (streams `0..n` of
/// `seed`) and fit each one starting from the truth.
pub fn simulation_study(
    model: &Arc<LatentModel>,
    true_theta: &[f64],
    template: &ObservationTemplate,
    n_datasets: usize,
    seed: u64,
    opts: &MapOptions,
) -> Result<StudyResult> {
    let seeds: Vec<DatasetSeed> = (0..n_datasets as u64).map(|stream| DatasetSeed { seed, stream }).collect();
    study(model, true_theta, template, &seeds, opts)
}

/// As [`simulation_study`], one dataset per seed (stream 0).
pub fn simulation_study_with_seeds(
    model: &Arc<LatentModel>,
    true_theta: &[f64],
    template: &ObservationTemplate,
    seeds: &[u64],
    opts: &MapOptions,
) -> Result<StudyResult> {
    let seeds: Vec<DatasetSeed> = seeds.iter().map(|&seed| DatasetSeed { seed, stream: 0 }).collect();
    study(model, true_theta, template, &seeds, opts)
}

fn study(
    model: &Arc<LatentModel>,
    true_theta: &[f64],
    template: &ObservationTemplate,
    seeds: &[DatasetSeed],
    opts: &MapOptions,
) -> Result<StudyResult> {
    if seeds.len() < 2 {
        return Err(Error::InvalidSpec("a study needs at least two datasets".into()));
    }
    let factor = model.precision_factor(true_theta)?;
    let layout = model.layout();
    let opts = MapOptions { information: false, ..*opts };
    let fits: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|&at| {
            let obs = simulate_observation(&factor, template, at).ok()?;
            let post = Posterior::new(Arc::clone(model), obs).ok()?;
            let fit = map_estimate(&post, true_theta, &opts).ok()?;
            if !fit.converged {
                return None;
            }
            let mut theta = fit.theta;
            // -v and v give the same model; report the representative on the
            // side of the truth
            let align: f64 = theta[1..].iter().zip(&true_theta[1..]).map(|(a, b)| a * b).sum();
            if layout.has_sign_symmetry() && align < 0.0 {
                theta = layout.flip_sign(&theta);
            }
            Some(theta)
        })
        .collect();
    let failed: Vec<DatasetSeed> = seeds.iter().zip(&fits).filter(|(_, f)| f.is_none()).map(|(s, _)| *s).collect();
    let estimates: Vec<Vec<f64>> = fits.into_iter().flatten().collect();
    let p = true_theta.len();
    let k = estimates.len() as f64;
    let mean: Vec<f64> = (0..p).map(|i| estimates.iter().map(|e| e[i]).sum::<f64>() / k).collect();
    let sample_sd: Vec<f64> = (0..p)
        .map(|i| {
            let ss: f64 = estimates.iter().map(|e| (e[i] - mean[i]).powi(2)).sum();
            (ss / (k - 1.0)).sqrt()
        })
        .collect();
    Ok(StudyResult {
        names: layout.names(),
        true_theta: true_theta.to_vec(),
        datasets: seeds.len(),
        failures: failed.len(),
        failed,
        bias: mean.iter().zip(true_theta).map(|(m, t)| m - t).collect(),
        mean,
        sample_sd,
        estimates,
    })
}

/// Fit from each start and rank the results by log-posterior, highest
/// first.
pub fn multistart_diagnostics(posterior: &Posterior, starts: &[Vec<f64>], opts: &MapOptions) -> Result<Vec<FitResult>> {
    if starts.is_empty() {
        return Err(Error::InvalidSpec("no starting points".into()));
    }
    let mut fits = starts.par_iter().map(|s| map_estimate(posterior, s, opts)).collect::<Result<Vec<_>>>()?;
    fits.sort_by(|a, b| b.log_post.total_cmp(&a.log_post));
    Ok(fits)
}
