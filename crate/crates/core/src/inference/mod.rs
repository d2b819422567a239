//! Bayesian estimation of the anisotropy parameters.
//!
//! The latent field `u ~ N(0, Q(theta)^{-1})` is either observed exactly or
//! through `y = A u + e` with `e ~ N(0, Q_N^{-1})`, `A` the identity or a
//! selection of cells. In the noisy case `u` is integrated out:
//!
//! ```text
//! log p(y | theta) = -m/2 log 2 pi + 1/2 log|Q_N| + 1/2 log|Q| - 1/2 log|Q_C|
//!                    - 1/2 y^T Q_N y + 1/2 b^T mu_C
//! ```
//!
//! with `Q_C = Q + A^T Q_N A`, `b = A^T Q_N y` and `mu_C = Q_C^{-1} b`. The prior is improper and
//! flat on the feasible set, so the log-posterior equals the log-likelihood
//! there and is `-inf` elsewhere.

mod optimize;
mod study;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::{assemble_from_faces, FaceValues, PrecisionAssembler};
use crate::coefficients::{AnisotropySpec, KappaSpec, ParamLayout, SymMat2};
use crate::error::{Error, Result};
use crate::factor::{Ordering, SymbolicCholesky};
use crate::gmrf::{factorize_symbolic, gaussian_log_density, PrecisionFactor};
use crate::grid::{GridSpec, Point};
use crate::sparse::CsrMatrix;

pub use optimize::{
    fd_gradient, fd_hessian, map_estimate, maximize, observed_information, FitResult, Information, MapOptions, Maximum,
};
pub use study::{
    multistart_diagnostics, simulate_observation, simulation_study, simulation_study_with_seeds, DatasetSeed,
    ObservationTemplate, StudyResult,
};

/// How the latent field is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    n_latent: usize,
    /// Observed cell of each datum; `None` is the identity.
    selection: Option<Vec<usize>>,
    noise_precision: Vec<f64>,
    y: Vec<f64>,
    exact: bool,
}

impl ObservationModel {
    /// The latent field itself, without noise.
    pub fn exact(u: Vec<f64>) -> Self {
        Self { n_latent: u.len(), selection: None, noise_precision: Vec::new(), y: u, exact: true }
    }

    /// `y = u + e` with i.i.d. noise of the given precision.
    pub fn noisy(y: Vec<f64>, noise_precision: f64) -> Result<Self> {
        let n = y.len();
        Self::noisy_general(n, None, y, vec![noise_precision; n])
    }

    /// `y_k = u[cells[k]] + e_k`.
    pub fn noisy_selection(n_latent: usize, cells: Vec<usize>, y: Vec<f64>, noise_precision: f64) -> Result<Self> {
        let m = y.len();
        Self::noisy_general(n_latent, Some(cells), y, vec![noise_precision; m])
    }

    pub fn noisy_general(
        n_latent: usize,
        selection: Option<Vec<usize>>,
        y: Vec<f64>,
        noise_precision: Vec<f64>,
    ) -> Result<Self> {
        let m = selection.as_ref().map_or(n_latent, Vec::len);
        if y.len() != m || noise_precision.len() != m {
            return Err(Error::InvalidObservation(format!(
                "{m} observations but {} data values and {} noise precisions",
                y.len(),
                noise_precision.len()
            )));
        }
        if let Some(cells) = &selection {
            if let Some(c) = cells.iter().find(|&&c| c >= n_latent) {
                return Err(Error::InvalidObservation(format!("cell {c} is outside 0..{n_latent}")));
            }
        }
        if let Some(p) = noise_precision.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidObservation(format!("noise precision must be positive, got {p}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservation("data contain non-finite values".into()));
        }
        Ok(Self { n_latent, selection, noise_precision, y, exact: false })
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn n_latent(&self) -> usize {
        self.n_latent
    }

    pub fn num_observations(&self) -> usize {
        self.y.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    /// Diagonal of `Q_N`; empty for exact observations.
    pub fn noise_precision(&self) -> &[f64] {
        &self.noise_precision
    }

    pub fn selection(&self) -> Option<&[usize]> {
        self.selection.as_deref()
    }

    fn cell(&self, k: usize) -> usize {
        self.selection.as_ref().map_or(k, |s| s[k])
    }

    /// The operator `A` as a sparse matrix.
    pub fn operator(&self) -> CsrMatrix {
        let triplets: Vec<_> = (0..self.num_observations()).map(|k| (k, self.cell(k), 1.0)).collect();
        CsrMatrix::from_triplets(self.num_observations(), self.n_latent, &triplets).expect("in range")
    }

    /// `diag(A^T Q_N A)` and `A^T Q_N y`.
    fn conditioning_terms(&self) -> (Vec<f64>, Vec<f64>) {
        let mut d = vec![0.0; self.n_latent];
        let mut b = vec![0.0; self.n_latent];
        for k in 0..self.num_observations() {
            let c = self.cell(k);
            d[c] += self.noise_precision[k];
            b[c] += self.noise_precision[k] * self.y[k];
        }
        (d, b)
    }
}

/// Support of one parameter under the flat prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Real,
    Positive,
    NonNegative,
}

/// Improper uniform prior: log-density zero on the support, `-inf` off it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorSpec {
    support: Vec<Support>,
}

impl PriorSpec {
    /// `gamma > 0`, `beta >= 0` for fixed fields, everything else free.
    pub fn improper_uniform(layout: &ParamLayout) -> Self {
        let mut support = vec![Support::Real; layout.len()];
        support[0] = Support::Positive;
        if let ParamLayout::FixedField(_) = layout {
            support[1] = Support::NonNegative;
        }
        Self { support }
    }

    pub fn support(&self) -> &[Support] {
        &self.support
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let inside = theta.len() == self.support.len()
            && theta.iter().zip(&self.support).all(|(&x, s)| {
                x.is_finite()
                    && match s {
                        Support::Real => true,
                        Support::Positive => x > 0.0,
                        Support::NonNegative => x >= 0.0,
                    }
            });
        if inside {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Per-face quantities that do not depend on `theta`.
#[derive(Debug, Clone)]
enum FaceBasis {
    /// `cos` and `sin` of every phase, interleaved per frequency.
    Fourier { nfreq: usize, vertical: Vec<f64>, horizontal: Vec<f64> },
    /// The base field.
    Fixed { vertical: Vec<[f64; 2]>, horizontal: Vec<[f64; 2]> },
}

impl FaceBasis {
    fn new(grid: &GridSpec, layout: &ParamLayout) -> Self {
        let mut vpts = Vec::with_capacity(grid.num_cells());
        let mut hpts = Vec::with_capacity(grid.num_cells());
        for j in 0..grid.cells_y() {
            for i in 0..grid.cells_x() {
                vpts.push(grid.vertical_face_center(i, j));
                hpts.push(grid.horizontal_face_center(i, j));
            }
        }
        match layout {
            ParamLayout::Constant => Self::Fourier { nfreq: 0, vertical: Vec::new(), horizontal: Vec::new() },
            ParamLayout::Fourier { width, height, freqs } => {
                let trig = |pts: &[Point]| -> Vec<f64> {
                    let mut out = Vec::with_capacity(2 * freqs.len() * pts.len());
                    for p in pts {
                        for (k, l) in freqs.iter() {
                            let phase = 2.0 * PI * (k as f64 * p.x / width + l as f64 * p.y / height);
                            let (s, c) = phase.sin_cos();
                            out.push(c);
                            out.push(s);
                        }
                    }
                    out
                };
                Self::Fourier { nfreq: freqs.len(), vertical: trig(&vpts), horizontal: trig(&hpts) }
            }
            ParamLayout::FixedField(base) => {
                let eval = |pts: &[Point]| pts.iter().map(|&p| base.value_at(p)).collect();
                Self::Fixed { vertical: eval(&vpts), horizontal: eval(&hpts) }
            }
        }
    }

    fn faces(&self, grid: &GridSpec, theta: &[f64]) -> Result<FaceValues> {
        let gamma = theta[0];
        let (vertical, horizontal) = match self {
            Self::Fourier { nfreq, vertical, horizontal } => {
                let h = |trig: &[f64], face: usize| {
                    let mut v = [theta[1], theta[2]];
                    let t = &trig[2 * nfreq * face..2 * nfreq * (face + 1)];
                    for (f, cs) in t.chunks_exact(2).enumerate() {
                        let c = &theta[3 + 4 * f..7 + 4 * f];
                        v[0] += c[0] * cs[0] + c[1] * cs[1];
                        v[1] += c[2] * cs[0] + c[3] * cs[1];
                    }
                    SymMat2::from_gamma_and_vector(gamma, v)
                };
                let n = grid.num_cells();
                ((0..n).map(|f| h(vertical, f)).collect(), (0..n).map(|f| h(horizontal, f)).collect())
            }
            Self::Fixed { vertical, horizontal } => {
                let beta = theta[1];
                let h = |b: &[f64; 2]| {
                    SymMat2::new(gamma + beta * b[0] * b[0], beta * b[0] * b[1], gamma + beta * b[1] * b[1])
                };
                (vertical.iter().map(h).collect(), horizontal.iter().map(h).collect())
            }
        };
        FaceValues::new(*grid, vertical, horizontal)
    }
}

/// Everything about the latent model that does not depend on `theta` or the
/// data: grid, `kappa^2`, layout, prior, sparsity structure and its
/// symbolic factorization.
#[derive(Debug)]
pub struct LatentModel {
    grid: GridSpec,
    kappa: KappaSpec,
    layout: ParamLayout,
    prior: PriorSpec,
    assembler: PrecisionAssembler,
    symbolic: Arc<SymbolicCholesky>,
    basis: FaceBasis,
}

impl LatentModel {
    pub fn new(grid: GridSpec, kappa: KappaSpec, layout: ParamLayout) -> Result<Self> {
        let assembler = PrecisionAssembler::new(&grid);
        let symbolic =
            Arc::new(SymbolicCholesky::analyze(Arc::clone(assembler.pattern()), Ordering::nested_dissection(&grid))?);
        let basis = FaceBasis::new(&grid, &layout);
        let prior = PriorSpec::improper_uniform(&layout);
        Ok(Self { grid, kappa, layout, prior, assembler, symbolic, basis })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kappa(&self) -> &KappaSpec {
        &self.kappa
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn num_params(&self) -> usize {
        self.layout.len()
    }

    /// `H` at every face for the given parameters.
    pub fn faces(&self, theta: &[f64]) -> Result<FaceValues> {
        self.layout.check_len(theta)?;
        if self.prior.log_density(theta) == f64::NEG_INFINITY {
            return Err(Error::Infeasible(format!("theta = {theta:?} is outside the prior support")));
        }
        self.basis.faces(&self.grid, theta)
    }

    pub fn spec(&self, theta: &[f64]) -> Result<AnisotropySpec> {
        self.layout.unpack(theta)
    }

    /// Factorization of `Q(theta)`.
    pub fn precision_factor(&self, theta: &[f64]) -> Result<PrecisionFactor> {
        let faces = self.faces(theta)?;
        let model = assemble_from_faces(&self.assembler, &self.kappa, &faces)?;
        factorize_symbolic(model.precision(), &self.symbolic)
    }
}

/// The posterior of `theta` for one set of observations.
#[derive(Debug, Clone)]
pub struct Posterior {
    model: Arc<LatentModel>,
    obs: ObservationModel,
    /// `diag(A^T Q_N A)` and `A^T Q_N y`, noisy case only.
    conditioning: Option<(Vec<f64>, Vec<f64>)>,
    /// Terms of the log-likelihood that do not depend on `theta`.
    constant: f64,
}

/// Quantities computed while evaluating the posterior at one `theta`.
#[derive(Debug, Clone)]
pub struct PosteriorWorkspace {
    pub theta: Vec<f64>,
    pub prior: PrecisionFactor,
    /// Factor of `Q_C` and the conditional mean `mu_C`, noisy case only.
    pub conditional: Option<(PrecisionFactor, Vec<f64>)>,
    pub log_posterior: f64,
}

impl Posterior {
    pub fn new(model: Arc<LatentModel>, obs: ObservationModel) -> Result<Self> {
        if obs.n_latent() != model.grid.num_cells() {
            return Err(Error::DimensionMismatch { expected: model.grid.num_cells(), got: obs.n_latent() });
        }
        let (conditioning, constant) = if obs.is_exact() {
            (None, 0.0)
        } else {
            let m = obs.num_observations() as f64;
            let log_det_n: f64 = obs.noise_precision.iter().map(|p| p.ln()).sum();
            (Some(obs.conditioning_terms()), -0.5 * m * (2.0 * PI).ln() + 0.5 * log_det_n)
        };
        Ok(Self { model, obs, conditioning, constant })
    }

    pub fn model(&self) -> &Arc<LatentModel> {
        &self.model
    }

    pub fn observations(&self) -> &ObservationModel {
        &self.obs
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<PosteriorWorkspace> {
        let prior = self.model.prior.log_density(theta);
        let factor = self.model.precision_factor(theta)?;
        match &self.conditioning {
            None => {
                let log_posterior = gaussian_log_density(&factor, &self.obs.y)? + prior;
                Ok(PosteriorWorkspace { theta: theta.to_vec(), prior: factor, conditional: None, log_posterior })
            }
            Some((d, b)) => {
                let qc = factor.precision().add_diagonal(d)?;
                let qc = factorize_symbolic(&qc, &self.model.symbolic)?;
                let mean = qc.solve(b)?;
                // y^T Q_N y - b^T mu = (y - A mu)^T Q_N (y - A mu) + mu^T Q mu;
                // the right side avoids cancellation when Q_N is large
                let misfit: f64 = (0..self.obs.num_observations())
                    .map(|k| {
                        let r = self.obs.y[k] - mean[self.obs.cell(k)];
                        self.obs.noise_precision[k] * r * r
                    })
                    .sum();
                let quad = misfit + factor.precision().quadratic_form(&mean)?;
                let log_posterior = prior + self.constant + 0.5 * factor.log_det() - 0.5 * qc.log_det() - 0.5 * quad;
                Ok(PosteriorWorkspace {
                    theta: theta.to_vec(),
                    prior: factor,
                    conditional: Some((qc, mean)),
                    log_posterior,
                })
            }
        }
    }

    /// The log-posterior, or `-inf` where it cannot be evaluated (outside the
    /// prior support, or a precision that is not positive definite).
    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta).map_or(f64::NEG_INFINITY, |w| w.log_posterior)
    }
}

/// Root-mean-square Frobenius distance between two tensor fields over the
/// cell centres of `grid`.
pub fn h_discrepancy(h_true: &AnisotropySpec, h_est: &AnisotropySpec, grid: &GridSpec) -> f64 {
    let sum: f64 = grid
        .cells()
        .map(|c| {
            let p = grid.cell_center(c);
            let d = h_true.h_at(p).sub(&h_est.h_at(p)).frobenius_norm();
            d * d
        })
        .sum();
    (sum / grid.num_cells() as f64).sqrt()
}

#[cfg(test)]
mod tests;
