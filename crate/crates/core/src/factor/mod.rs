//! Sparse Cholesky factorization `P^T Q P = L L^T` for symmetric positive
//! definite matrices.
//!
//! The factorization is supernodal and multifrontal. A [`SymbolicCholesky`]
//! depends only on the sparsity pattern and the ordering, so it is computed
//! once per grid and shared by every numeric factorization on that grid.
//! The factor supports solves, sampling, log-determinants and the selected
//! inverse (all entries of `Q^{-1}` on the pattern of `L`).

pub mod dense;
pub mod ordering;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparsityPattern};

pub use ordering::Ordering;

/// Structure of the factor.
#[derive(Debug)]
pub struct SymbolicCholesky {
    pattern: Arc<SparsityPattern>,
    ordering: Ordering,
    iperm: Vec<usize>,
    /// Row indices below the diagonal block of each supernode, in permuted
    /// numbering, sorted and all beyond the supernode's own columns.
    rows: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Position of each row of a supernode's update matrix inside its
    /// parent's front.
    relative: Vec<Vec<usize>>,
    /// For each supernode, `(value index in Q, offset in the front)` of the
    /// entries it assembles; all of them fall in the supernode's own columns.
    scatter_ptr: Vec<usize>,
    scatter: Vec<(usize, usize)>,
    /// Start of each supernode's block in the factor storage.
    offsets: Vec<usize>,
    supernode_of: Vec<usize>,
    max_front: usize,
}

impl SymbolicCholesky {
    pub fn analyze(pattern: Arc<SparsityPattern>, ordering: Ordering) -> Result<Self> {
        let n = pattern.n_rows();
        if pattern.n_cols() != n || ordering.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: ordering.len() });
        }
        if !pattern.is_structurally_symmetric() {
            return Err(Error::InvalidSpec("matrix pattern is not symmetric".into()));
        }
        let perm = ordering.perm();
        let iperm = ordering.inverse();
        let starts = ordering.supernode_starts().to_vec();
        let ns = ordering.num_supernodes();
        let mut supernode_of = vec![0; n];
        for s in 0..ns {
            supernode_of[starts[s]..starts[s + 1]].fill(s);
        }

        let mut rows: Vec<Vec<usize>> = Vec::with_capacity(ns);
        let mut parent = vec![None; ns];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for s in 0..ns {
            let end = starts[s + 1];
            let mut r: Vec<usize> = Vec::new();
            for &old in &perm[starts[s]..end] {
                r.extend(pattern.row_cols(old).iter().map(|&c| iperm[c]).filter(|&c| c >= end));
            }
            for &c in &children[s] {
                r.extend(rows[c].iter().copied().filter(|&x| x >= end));
            }
            r.sort_unstable();
            r.dedup();
            if let Some(&first) = r.first() {
                let p = supernode_of[first];
                parent[s] = Some(p);
                children[p].push(s);
            }
            rows.push(r);
        }

        let front_index = |s: usize, x: usize| -> usize {
            if x < starts[s + 1] {
                x - starts[s]
            } else {
                starts[s + 1] - starts[s] + rows[s].binary_search(&x).expect("row in front")
            }
        };
        let relative: Vec<Vec<usize>> = (0..ns)
            .map(|s| match parent[s] {
                Some(p) => rows[s].iter().map(|&x| front_index(p, x)).collect(),
                None => Vec::new(),
            })
            .collect();

        let mut per_sn: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ns];
        for old_r in 0..n {
            let r = iperm[old_r];
            let base = pattern.row_ptr()[old_r];
            for (k, &old_c) in pattern.row_cols(old_r).iter().enumerate() {
                let c = iperm[old_c];
                if r < c {
                    continue;
                }
                let s = supernode_of[c];
                let m = starts[s + 1] - starts[s] + rows[s].len();
                per_sn[s].push((base + k, (c - starts[s]) * m + front_index(s, r)));
            }
        }
        let mut scatter_ptr = vec![0];
        let mut scatter = Vec::with_capacity(pattern.nnz() / 2 + n);
        for v in per_sn {
            scatter.extend(v);
            scatter_ptr.push(scatter.len());
        }

        let mut offsets = vec![0];
        let mut max_front = 0;
        for s in 0..ns {
            let nc = starts[s + 1] - starts[s];
            let m = nc + rows[s].len();
            max_front = max_front.max(m);
            offsets.push(offsets[s] + m * nc);
        }

        Ok(Self {
            pattern,
            ordering,
            iperm,
            rows,
            parent,
            children,
            relative,
            scatter_ptr,
            scatter,
            offsets,
            supernode_of,
            max_front,
        })
    }

    pub fn n(&self) -> usize {
        self.iperm.len()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn num_supernodes(&self) -> usize {
        self.rows.len()
    }

    /// Stored entries of `L`, including the explicit zeros of dense blocks.
    pub fn factor_len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Largest frontal matrix dimension.
    pub fn max_front(&self) -> usize {
        self.max_front
    }

    /// Approximate floating-point operation count of one numeric factorization.
    pub fn flop_count(&self) -> f64 {
        (0..self.num_supernodes())
            .map(|s| {
                let (c, r) = (self.ncols(s) as f64, self.rows[s].len() as f64);
                c * c * c / 3.0 + c * c * r + c * r * r
            })
            .sum()
    }

    pub fn parent(&self, s: usize) -> Option<usize> {
        self.parent[s]
    }

    fn start(&self, s: usize) -> usize {
        self.ordering.supernode_starts()[s]
    }

    fn ncols(&self, s: usize) -> usize {
        self.start(s + 1) - self.start(s)
    }

    fn front_dim(&self, s: usize) -> usize {
        self.ncols(s) + self.rows[s].len()
    }

    fn accepts(&self, q: &CsrMatrix) -> bool {
        Arc::ptr_eq(q.pattern(), &self.pattern) || **q.pattern() == *self.pattern
    }

    /// Numeric factorization of a matrix with this structure.
    pub fn factor(self: &Arc<Self>, q: &CsrMatrix) -> Result<CholeskyFactor> {
        if !self.accepts(q) {
            return Err(Error::InvalidSpec("matrix pattern differs from the analyzed pattern".into()));
        }
        let values = q.values();
        let ns = self.num_supernodes();
        let mut l = vec![0.0; self.factor_len()];
        let mut updates: Vec<Vec<f64>> = vec![Vec::new(); ns];
        for s in 0..ns {
            let nc = self.ncols(s);
            let m = self.front_dim(s);
            let nr = m - nc;
            let panel = &mut l[self.offsets[s]..self.offsets[s + 1]];
            let mut schur = vec![0.0; nr * nr];
            for &(k, off) in &self.scatter[self.scatter_ptr[s]..self.scatter_ptr[s + 1]] {
                panel[off] += values[k];
            }
            for &c in &self.children[s] {
                let u = std::mem::take(&mut updates[c]);
                let rel = &self.relative[c];
                let nu = rel.len();
                for (b, &rb) in rel.iter().enumerate() {
                    let src = &u[b * nu..(b + 1) * nu];
                    if rb < nc {
                        let dst = &mut panel[rb * m..(rb + 1) * m];
                        for (&ra, v) in rel[b..].iter().zip(&src[b..]) {
                            dst[ra] += v;
                        }
                    } else {
                        let dst = &mut schur[(rb - nc) * nr..(rb - nc + 1) * nr];
                        for (&ra, v) in rel[b..].iter().zip(&src[b..]) {
                            dst[ra - nc] += v;
                        }
                    }
                }
            }
            if let Err(local) = dense::partial_cholesky(panel, &mut schur, m, nc) {
                return Err(Error::NotPositiveDefinite { pivot: self.ordering.perm()[self.start(s) + local] });
            }
            for c in 1..nc {
                panel[c * m..c * m + c].fill(0.0);
            }
            updates[s] = schur;
        }
        Ok(CholeskyFactor { symbolic: Arc::clone(self), l })
    }
}

/// Numeric Cholesky factor.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    l: Vec<f64>,
}

impl CholeskyFactor {
    /// Analyze and factor in one step.
    pub fn new(q: &CsrMatrix, ordering: Ordering) -> Result<Self> {
        let symbolic = Arc::new(SymbolicCholesky::analyze(Arc::clone(q.pattern()), ordering)?);
        symbolic.factor(q)
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub fn n(&self) -> usize {
        self.symbolic.n()
    }

    fn block(&self, s: usize) -> &[f64] {
        &self.l[self.symbolic.offsets[s]..self.symbolic.offsets[s + 1]]
    }

    /// `log det Q = 2 sum log L_kk`.
    pub fn log_det(&self) -> f64 {
        let sym = &self.symbolic;
        let mut acc = 0.0;
        for s in 0..sym.num_supernodes() {
            let m = sym.front_dim(s);
            let b = self.block(s);
            acc += (0..sym.ncols(s)).map(|c| b[c * m + c].ln()).sum::<f64>();
        }
        2.0 * acc
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        Ok(())
    }

    /// `y <- L^{-1} y` in permuted numbering.
    fn forward(&self, y: &mut [f64]) {
        let sym = &self.symbolic;
        for s in 0..sym.num_supernodes() {
            let (start, nc, m) = (sym.start(s), sym.ncols(s), sym.front_dim(s));
            let b = self.block(s);
            dense::solve_lower(b, m, nc, &mut y[start..start + nc]);
            for (k, &r) in sym.rows[s].iter().enumerate() {
                let mut acc = 0.0;
                for c in 0..nc {
                    acc += b[c * m + nc + k] * y[start + c];
                }
                y[r] -= acc;
            }
        }
    }

    /// `y <- L^{-T} y` in permuted numbering.
    fn backward(&self, y: &mut [f64]) {
        let sym = &self.symbolic;
        for s in (0..sym.num_supernodes()).rev() {
            let (start, nc, m) = (sym.start(s), sym.ncols(s), sym.front_dim(s));
            let b = self.block(s);
            let rows = &sym.rows[s];
            for c in 0..nc {
                let col = &b[c * m + nc..(c + 1) * m];
                let dot: f64 = col.iter().zip(rows).map(|(a, &r)| a * y[r]).sum();
                y[start + c] -= dot;
            }
            dense::solve_lower_transpose(b, m, nc, &mut y[start..start + nc]);
        }
    }

    fn permute_in(&self, b: &[f64]) -> Vec<f64> {
        self.symbolic.ordering.perm().iter().map(|&old| b[old]).collect()
    }

    fn permute_out(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for (new, &old) in self.symbolic.ordering.perm().iter().enumerate() {
            out[old] = y[new];
        }
        out
    }

    /// Solve `Q x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        let mut y = self.permute_in(b);
        self.forward(&mut y);
        self.backward(&mut y);
        Ok(self.permute_out(&y))
    }

    /// `P L^{-T} z`: maps standard normal `z` to a draw with precision `Q`.
    pub fn sample_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        let mut y = z.to_vec();
        self.backward(&mut y);
        Ok(self.permute_out(&y))
    }

    /// `||L^{-1} P^T b||^2 = b^T Q^{-1} b`.
    pub fn inverse_quadratic_form(&self, b: &[f64]) -> Result<f64> {
        self.check_len(b)?;
        let mut y = self.permute_in(b);
        self.forward(&mut y);
        Ok(y.iter().map(|v| v * v).sum())
    }

    /// Entries of `Q^{-1}` on the structure of `L`.
    pub fn selected_inverse(&self) -> SelectedInverse {
        let sym = &self.symbolic;
        let ns = sym.num_supernodes();
        let mut sigma = vec![0.0; sym.factor_len()];
        for s in (0..ns).rev() {
            let (nc, m) = (sym.ncols(s), sym.front_dim(s));
            let nr = m - nc;
            let b = self.block(s);
            let linv = dense::lower_inverse(b, m, nc);
            // W = L21 L11^{-1}, nr x nc
            let mut w = vec![0.0; nr * nc];
            // S_RR gathered from ancestors, full symmetric nr x nr
            let mut srr = vec![0.0; nr * nr];
            if nr > 0 {
                // SAFETY: distinct buffers.
                unsafe {
                    dense::gemm_nn(nr, nc, nc, 1.0, b.as_ptr().add(nc), m, linv.as_ptr(), nc, 0.0, w.as_mut_ptr(), nr);
                }
                let rows = &sym.rows[s];
                for bcol in 0..nr {
                    let rb = rows[bcol];
                    let t = sym.supernode_of[rb];
                    let (tstart, tnc, tm) = (sym.start(t), sym.ncols(t), sym.front_dim(t));
                    let tcol = rb - tstart;
                    let tblock = &sigma[sym.offsets[t]..sym.offsets[t + 1]];
                    let trows = &sym.rows[t];
                    let mut cursor = 0;
                    for a in bcol..nr {
                        let ra = rows[a];
                        let local = if ra < tstart + tnc {
                            ra - tstart
                        } else {
                            while trows[cursor] < ra {
                                cursor += 1;
                            }
                            tnc + cursor
                        };
                        let v = tblock[tcol * tm + local];
                        srr[bcol * nr + a] = v;
                        srr[a * nr + bcol] = v;
                    }
                }
            }
            let out = &mut sigma[sym.offsets[s]..sym.offsets[s + 1]];
            let mut scc = vec![0.0; nc * nc];
            // SAFETY: all operands are distinct buffers; Σ_RC is written into
            // rows nc..m of the output block with leading dimension m.
            unsafe {
                dense::gemm_tn(nc, nc, nc, 1.0, linv.as_ptr(), nc, linv.as_ptr(), nc, 0.0, scc.as_mut_ptr(), nc);
                if nr > 0 {
                    let src = out.as_mut_ptr().add(nc);
                    dense::gemm_nn(nr, nc, nr, -1.0, srr.as_ptr(), nr, w.as_ptr(), nr, 0.0, src, m);
                    dense::gemm_tn(nc, nc, nr, -1.0, src, m, w.as_ptr(), nr, 1.0, scc.as_mut_ptr(), nc);
                }
            }
            for c in 0..nc {
                out[c * m..c * m + nc].copy_from_slice(&scc[c * nc..(c + 1) * nc]);
            }
        }
        SelectedInverse { symbolic: Arc::clone(sym), sigma }
    }
}

/// `Q^{-1}` restricted to the structure of the factor.
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    symbolic: Arc<SymbolicCholesky>,
    sigma: Vec<f64>,
}

impl SelectedInverse {
    /// Diagonal of `Q^{-1}` in original numbering.
    pub fn diagonal(&self) -> Vec<f64> {
        let sym = &self.symbolic;
        let mut d = vec![0.0; sym.n()];
        let perm = sym.ordering.perm();
        for s in 0..sym.num_supernodes() {
            let (start, nc, m) = (sym.start(s), sym.ncols(s), sym.front_dim(s));
            let block = &self.sigma[sym.offsets[s]..sym.offsets[s + 1]];
            for c in 0..nc {
                d[perm[start + c]] = block[c * m + c];
            }
        }
        d
    }

    /// Entry `(i, j)` of `Q^{-1}` in original numbering, if it lies on the
    /// structure of the factor.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let sym = &self.symbolic;
        let (a, b) = (sym.iperm[i], sym.iperm[j]);
        let (r, c) = if a >= b { (a, b) } else { (b, a) };
        let s = sym.supernode_of[c];
        let (start, nc, m) = (sym.start(s), sym.ncols(s), sym.front_dim(s));
        let local = if r < start + nc { r - start } else { nc + sym.rows[s].binary_search(&r).ok()? };
        Some(self.sigma[sym.offsets[s] + (c - start) * m + local])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain dense Cholesky on a row-major matrix, used as the oracle.
    fn dense_cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
        let mut l = vec![0.0f64; n * n];
        for j in 0..n {
            let d = a[j * n + j] - (0..j).map(|k| l[j * n + k].powi(2)).sum::<f64>();
            if d <= 0.0 {
                return None;
            }
            l[j * n + j] = d.sqrt();
            for i in j + 1..n {
                let s = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                l[i * n + j] = s / l[j * n + j];
            }
        }
        Some(l)
    }

    fn dense_inverse(a: &[f64], n: usize) -> Vec<f64> {
        let l = dense_cholesky(a, n).unwrap();
        let mut inv = vec![0.0; n * n];
        for k in 0..n {
            let mut y = vec![0.0; n];
            y[k] = 1.0;
            for i in 0..n {
                y[i] = (y[i] - (0..i).map(|j| l[i * n + j] * y[j]).sum::<f64>()) / l[i * n + i];
            }
            for i in (0..n).rev() {
                y[i] = (y[i] - (i + 1..n).map(|j| l[j * n + i] * y[j]).sum::<f64>()) / l[i * n + i];
            }
            for i in 0..n {
                inv[i * n + k] = y[i];
            }
        }
        inv
    }

    fn random_spd(n: usize, density: f64, seed: u64) -> CsrMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                if rng.random::<f64>() < density {
                    let v = rng.random::<f64>() - 0.5;
                    dense[i * n + j] = v;
                    dense[j * n + i] = v;
                }
            }
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| dense[i * n + j].abs()).sum();
            dense[i * n + i] = row + 0.5 + rng.random::<f64>();
        }
        CsrMatrix::from_dense(n, &dense)
    }

    fn check_against_dense(q: &CsrMatrix, ordering: Ordering) {
        let n = q.n_rows();
        let dense = q.to_dense();
        let f = CholeskyFactor::new(q, ordering).unwrap();
        let l = dense_cholesky(&dense, n).unwrap();
        let logdet: f64 = 2.0 * (0..n).map(|k| l[k * n + k].ln()).sum::<f64>();
        assert!((f.log_det() - logdet).abs() < 1e-10 * logdet.abs().max(1.0));

        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.7).sin()).collect();
        let x = f.solve(&b).unwrap();
        let r = q.mul_vec(&x).unwrap();
        for k in 0..n {
            assert!((r[k] - b[k]).abs() < 1e-10);
        }

        let inv = dense_inverse(&dense, n);
        let sel = f.selected_inverse();
        let diag = sel.diagonal();
        for k in 0..n {
            assert!((diag[k] - inv[k * n + k]).abs() < 1e-10 * inv[k * n + k].abs().max(1e-3));
        }
        for i in 0..n {
            for (j, _) in q.row(i) {
                let got = sel.get(i, j).expect("pattern of Q lies in the factor");
                assert!((got - inv[i * n + j]).abs() < 1e-10);
            }
        }
        let quad: f64 = b.iter().zip(&x).map(|(a, c)| a * c).sum();
        assert!((f.inverse_quadratic_form(&b).unwrap() - quad).abs() < 1e-10 * quad.abs().max(1.0));
    }

    #[test]
    fn matches_dense_with_natural_blocks() {
        for (n, block) in [(1, 1), (7, 1), (7, 3), (40, 8), (40, 64)] {
            let q = random_spd(n, 0.15, n as u64 * 10 + block as u64);
            check_against_dense(&q, Ordering::natural(n, block));
        }
    }

    #[test]
    fn matches_dense_with_nested_dissection() {
        use crate::assembly::assemble_precision;
        use crate::coefficients::{AnisotropySpec, KappaSpec};
        use crate::grid::GridSpec;
        for (m, n) in [(3, 3), (6, 6), (11, 9), (16, 16)] {
            let grid = GridSpec::new(m as f64, n as f64, m, n).unwrap();
            let spec = AnisotropySpec::rotated_constant(0.5, 3.0, 0.6).unwrap();
            let model = assemble_precision(&grid, &KappaSpec::new(0.3).unwrap(), &spec).unwrap();
            check_against_dense(model.precision(), Ordering::nested_dissection(&grid));
        }
    }

    #[test]
    fn sample_transform_has_precision_q() {
        // P L^{-T} (L^{-1} P^T Q x) = x
        let q = random_spd(30, 0.2, 4);
        let f = CholeskyFactor::new(&q, Ordering::natural(30, 4)).unwrap();
        let x: Vec<f64> = (0..30).map(|k| k as f64 / 7.0 - 2.0).collect();
        let qx = q.mul_vec(&x).unwrap();
        let mut y = f.permute_in(&qx);
        f.forward(&mut y);
        let back = f.sample_transform(&y).unwrap();
        for k in 0..30 {
            assert!((back[k] - x[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_non_positive_definite_pivot() {
        let mut dense = vec![0.0; 9];
        dense[0] = 1.0;
        dense[4] = -1.0;
        dense[8] = 1.0;
        let q = CsrMatrix::from_dense(3, &dense);
        match CholeskyFactor::new(&q, Ordering::natural(3, 1)) {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refuses_foreign_pattern() {
        let q = random_spd(10, 0.3, 1);
        let sym = Arc::new(SymbolicCholesky::analyze(Arc::clone(q.pattern()), Ordering::natural(10, 2)).unwrap());
        assert!(sym.factor(&q.scaled(2.0)).is_ok());
        assert!(sym.factor(&random_spd(10, 0.3, 2)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn random_orderings_agree_with_dense(
                n in 1usize..30,
                seed in 0u64..1000,
                cuts in proptest::collection::vec(any::<bool>(), 30),
                shuffle in any::<u64>(),
            ) {
                use rand::{seq::SliceRandom, SeedableRng};
                let q = random_spd(n, 0.2, seed);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle));
                let mut starts = vec![0];
                starts.extend((1..n).filter(|&k| cuts[k]));
                starts.push(n);
                check_against_dense(&q, Ordering::new(perm, starts).unwrap());
            }
        }
    }
}
