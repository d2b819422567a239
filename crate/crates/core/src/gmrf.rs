//! Sampling, marginal variances, correlation fields and log-densities of a
//! GMRF with a given precision matrix.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::assembly::PrecisionModel;
use crate::error::{Error, Result};
use crate::factor::{CholeskyFactor, Ordering, SymbolicCholesky};
use crate::grid::{CellCoord, GridSpec};
use crate::sparse::CsrMatrix;

/// Block size of the natural ordering used when no grid is known.
const NATURAL_BLOCK: usize = 32;

/// A Cholesky factorization of `Q` together with `Q` itself.
#[derive(Debug, Clone)]
pub struct PrecisionFactor {
    q: CsrMatrix,
    chol: CholeskyFactor,
}

impl PrecisionFactor {
    pub fn precision(&self) -> &CsrMatrix {
        &self.q
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn n(&self) -> usize {
        self.q.n_rows()
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.chol.solve(b)
    }

    /// `P L^{-T} z`.
    pub fn half_solve(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.chol.sample_transform(z)
    }

    /// FNV-1a digest of the matrix, used to tag realizations.
    pub fn model_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.q.n_rows() as u64);
        for r in 0..self.q.n_rows() {
            for (c, v) in self.q.row(r) {
                feed(c as u64);
                feed(v.to_bits());
            }
        }
        h
    }
}

/// Factor a general symmetric positive definite matrix.
pub fn factorize(q: &CsrMatrix) -> Result<PrecisionFactor> {
    factorize_with(q, Ordering::natural(q.n_rows(), NATURAL_BLOCK))
}

/// Factor a precision matrix defined on `grid`, using a nested-dissection
/// ordering of the cells.
pub fn factorize_on_grid(q: &CsrMatrix, grid: &GridSpec) -> Result<PrecisionFactor> {
    if q.n_rows() != grid.num_cells() {
        return Err(Error::DimensionMismatch { expected: grid.num_cells(), got: q.n_rows() });
    }
    factorize_with(q, Ordering::nested_dissection(grid))
}

pub fn factorize_with(q: &CsrMatrix, ordering: Ordering) -> Result<PrecisionFactor> {
    Ok(PrecisionFactor { q: q.clone(), chol: CholeskyFactor::new(q, ordering)? })
}

/// Factor with a precomputed symbolic analysis.
pub fn factorize_symbolic(q: &CsrMatrix, symbolic: &Arc<SymbolicCholesky>) -> Result<PrecisionFactor> {
    Ok(PrecisionFactor { q: q.clone(), chol: symbolic.factor(q)? })
}

impl PrecisionModel {
    pub fn factorize(&self) -> Result<PrecisionFactor> {
        factorize_on_grid(self.precision(), self.grid())
    }
}

/// One draw `u ~ N(0, Q^{-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub values: Vec<f64>,
    pub seed: u64,
    /// Index of the draw within the seeded stream.
    pub stream: u64,
    pub model_hash: u64,
}

fn standard_normals(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn sample(factor: &PrecisionFactor, seed: u64) -> Realization {
    sample_stream(factor, seed, 0)
}

pub fn sample_stream(factor: &PrecisionFactor, seed: u64, stream: u64) -> Realization {
    let z = standard_normals(factor.n(), seed, stream);
    Realization {
        values: factor.half_solve(&z).expect("length matches"),
        seed,
        stream,
        model_hash: factor.model_hash(),
    }
}

/// `count` independent draws from one seed (streams `0..count`).
pub fn sample_many(factor: &PrecisionFactor, seed: u64, count: usize) -> Vec<Realization> {
    let hash = factor.model_hash();
    (0..count as u64)
        .map(|k| {
            let z = standard_normals(factor.n(), seed, k);
            Realization { values: factor.half_solve(&z).expect("length matches"), seed, stream: k, model_hash: hash }
        })
        .collect()
}

/// Exact `diag(Q^{-1})` by selected inversion.
pub fn marginal_variances(factor: &PrecisionFactor) -> Vec<f64> {
    factor.chol.selected_inverse().diagonal()
}

/// `Corr(u_ref, u_j)` for every cell `j`.
pub fn correlation_field(factor: &PrecisionFactor, grid: &GridSpec, reference: CellCoord) -> Result<Vec<f64>> {
    let variances = marginal_variances(factor);
    correlation_field_with(factor, grid, reference, &variances)
}

/// As [`correlation_field`] with precomputed marginal variances.
pub fn correlation_field_with(
    factor: &PrecisionFactor,
    grid: &GridSpec,
    reference: CellCoord,
    variances: &[f64],
) -> Result<Vec<f64>> {
    let n = factor.n();
    if grid.num_cells() != n || variances.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: variances.len() });
    }
    let r = grid.linear_index(reference);
    let mut e = vec![0.0; n];
    e[r] = 1.0;
    let c = factor.solve(&e)?;
    let cref = c[r];
    let mut out: Vec<f64> = c.iter().zip(variances).map(|(x, v)| x / (cref * v).sqrt()).collect();
    out[r] = 1.0;
    Ok(out)
}

/// `-(n/2) log 2 pi + (1/2) log|Q| - (1/2) u^T Q u`.
pub fn gaussian_log_density(factor: &PrecisionFactor, u: &[f64]) -> Result<f64> {
    let quad = factor.q.quadratic_form(u)?;
    Ok(-0.5 * factor.n() as f64 * (2.0 * PI).ln() + 0.5 * factor.log_det() - 0.5 * quad)
}
