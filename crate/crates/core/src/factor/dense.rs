//! Dense column-major kernels used inside supernodes.
//!
//! A block with `rows` rows stored column-major with leading dimension `ld`
//! has element `(r, c)` at `c * ld + r`.

/// Panel width of the blocked Cholesky.
const NB: usize = 128;
/// Width below which a panel is factored column by column.
const LEAF: usize = 16;

/// `C <- alpha * A * B^T + beta * C` on raw column-major views.
///
/// `A` is `m x k` with leading dimension `lda`, `B` is `n x k` with leading
/// dimension `ldb` and `C` is `m x n` with leading dimension `ldc`.
///
/// # Safety
/// All three views must lie in valid memory and `C` must not overlap `A` or `B`.
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn gemm_nt(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: *const f64,
    lda: usize,
    b: *const f64,
    ldb: usize,
    beta: f64,
    c: *mut f64,
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    matrixmultiply::dgemm(m, k, n, alpha, a, 1, lda as isize, b, ldb as isize, 1, beta, c, 1, ldc as isize);
}

/// `C <- alpha * A^T * B + beta * C`; `A` is `k x m`, `B` is `k x n`.
///
/// # Safety
/// Same requirements as [`gemm_nt`].
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn gemm_tn(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: *const f64,
    lda: usize,
    b: *const f64,
    ldb: usize,
    beta: f64,
    c: *mut f64,
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    matrixmultiply::dgemm(m, k, n, alpha, a, lda as isize, 1, b, 1, ldb as isize, beta, c, 1, ldc as isize);
}

/// `C <- alpha * A * B + beta * C`; `A` is `m x k`, `B` is `k x n`.
///
/// # Safety
/// Same requirements as [`gemm_nt`].
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn gemm_nn(
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: *const f64,
    lda: usize,
    b: *const f64,
    ldb: usize,
    beta: f64,
    c: *mut f64,
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    matrixmultiply::dgemm(m, k, n, alpha, a, 1, lda as isize, b, 1, ldb as isize, beta, c, 1, ldc as isize);
}

/// Partial Cholesky of a frontal matrix split into a panel and a trailing
/// block.
///
/// `panel` holds the leading `nc` columns of an `m x m` front (leading
/// dimension `m`) and is overwritten by `[L11; L21]`. `schur` holds the
/// trailing `(m - nc) x (m - nc)` block (leading dimension `m - nc`) and is
/// overwritten by `F22 - L21 L21^T`. Only lower triangles are read or
/// meaningful. On failure returns the local index of the offending pivot.
pub(crate) fn partial_cholesky(panel: &mut [f64], schur: &mut [f64], m: usize, nc: usize) -> Result<(), usize> {
    let nr = m - nc;
    debug_assert!(panel.len() >= m * nc && schur.len() >= nr * nr);
    let mut k0 = 0;
    while k0 < nc {
        let kb = NB.min(nc - k0);
        factor_panel(panel, m, k0, kb)?;
        update_trailing(panel, m, k0, kb, k0 + kb, nc);
        k0 += kb;
    }
    let mut c = 0;
    while c < nr {
        let cb = CB.min(nr - c);
        let a = panel[nc + c..].as_ptr();
        // SAFETY: `panel` and `schur` are distinct buffers.
        unsafe {
            gemm_nt(nr - c, cb, nc, -1.0, a, m, a, m, 1.0, schur.as_mut_ptr().add(c * nr + c), nr);
        }
        c += cb;
    }
    Ok(())
}

const CB: usize = 96;

/// `F[r, c] -= sum_t F[r, t] F[c, t]` over panel columns `t in k0..k0+kb`,
/// for target columns `c0..c1` and rows `r >= c`.
fn update_trailing(f: &mut [f64], m: usize, k0: usize, kb: usize, c0: usize, c1: usize) {
    let ptr = f.as_mut_ptr();
    let mut c = c0;
    while c < c1 {
        let cb = CB.min(c1 - c);
        // SAFETY: the panel columns k0..k0+kb and the target columns c..c+cb
        // are disjoint column ranges of the same buffer.
        unsafe {
            gemm_nt(m - c, cb, kb, -1.0, ptr.add(k0 * m + c), m, ptr.add(k0 * m + c), m, 1.0, ptr.add(c * m + c), m);
        }
        c += cb;
    }
}

/// Factor columns `k0..k0+kb` (all rows below the diagonal), assuming all
/// updates from earlier columns are applied.
fn factor_panel(f: &mut [f64], m: usize, k0: usize, kb: usize) -> Result<(), usize> {
    if kb > LEAF {
        let h = kb / 2;
        factor_panel(f, m, k0, h)?;
        update_trailing(f, m, k0, h, k0 + h, k0 + kb);
        return factor_panel(f, m, k0 + h, kb - h);
    }
    for j in k0..k0 + kb {
        let d = f[j * m + j];
        if !(d > 0.0 && d.is_finite()) {
            return Err(j);
        }
        let d = d.sqrt();
        f[j * m + j] = d;
        let inv = 1.0 / d;
        for x in &mut f[j * m + j + 1..j * m + m] {
            *x *= inv;
        }
        let (head, tail) = f.split_at_mut((j + 1) * m);
        let col = &head[j * m..];
        for jj in j + 1..k0 + kb {
            let l = col[jj];
            if l == 0.0 {
                continue;
            }
            let dst = &mut tail[(jj - j - 1) * m..(jj - j) * m];
            for (y, x) in dst[jj..].iter_mut().zip(&col[jj..]) {
                *y -= l * x;
            }
        }
    }
    Ok(())
}

/// Solve `L x = b` in place; `L` is `n x n` lower triangular with leading
/// dimension `ld`.
pub(crate) fn solve_lower(l: &[f64], ld: usize, n: usize, x: &mut [f64]) {
    for j in 0..n {
        let xj = x[j] / l[j * ld + j];
        x[j] = xj;
        if xj != 0.0 {
            for (y, a) in x[j + 1..n].iter_mut().zip(&l[j * ld + j + 1..j * ld + n]) {
                *y -= a * xj;
            }
        }
    }
}

/// Solve `L^T x = b` in place.
pub(crate) fn solve_lower_transpose(l: &[f64], ld: usize, n: usize, x: &mut [f64]) {
    for j in (0..n).rev() {
        let dot: f64 = x[j + 1..n].iter().zip(&l[j * ld + j + 1..j * ld + n]).map(|(a, b)| a * b).sum();
        x[j] = (x[j] - dot) / l[j * ld + j];
    }
}

/// Inverse of an `n x n` lower-triangular matrix, returned column-major with
/// leading dimension `n` and zeros above the diagonal.
pub(crate) fn lower_inverse(l: &[f64], ld: usize, n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        let col = &mut inv[j * n..(j + 1) * n];
        col[j] = 1.0;
        // forward substitution on e_j, starting at row j
        for k in j..n {
            let xk = col[k] / l[k * ld + k];
            col[k] = xk;
            if xk != 0.0 {
                for (y, a) in col[k + 1..n].iter_mut().zip(&l[k * ld + k + 1..k * ld + n]) {
                    *y -= a * xk;
                }
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(m: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b: Vec<f64> = (0..m * m).map(|_| next()).collect();
        let mut a = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                a[c * m + r] = (0..m).map(|k| b[k * m + r] * b[k * m + c]).sum::<f64>();
            }
            a[r * m + r] += m as f64 * 0.1;
        }
        a
    }

    fn reference_cholesky(a: &[f64], m: usize) -> Vec<f64> {
        let mut l = vec![0.0f64; m * m];
        for j in 0..m {
            let d = a[j * m + j] - (0..j).map(|k| l[k * m + j].powi(2)).sum::<f64>();
            l[j * m + j] = d.sqrt();
            for i in j + 1..m {
                let s = a[j * m + i] - (0..j).map(|k| l[k * m + i] * l[k * m + j]).sum::<f64>();
                l[j * m + i] = s / l[j * m + j];
            }
        }
        l
    }

    #[test]
    fn full_factor_matches_reference() {
        for m in [1, 5, 47, 48, 49, 130] {
            let a = spd(m, m as u64);
            let mut f = a.clone();
            partial_cholesky(&mut f, &mut [], m, m).unwrap();
            let l = reference_cholesky(&a, m);
            for c in 0..m {
                for r in c..m {
                    assert!((f[c * m + r] - l[c * m + r]).abs() < 1e-10, "m={m} ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn partial_factor_leaves_schur_complement() {
        let m = 110;
        let nc = 61;
        let a = spd(m, 7);
        let mut f = a[..m * nc].to_vec();
        let nr = m - nc;
        let mut schur: Vec<f64> = (0..nr * nr).map(|k| a[(nc + k / nr) * m + nc + k % nr]).collect();
        partial_cholesky(&mut f, &mut schur, m, nc).unwrap();
        let l = reference_cholesky(&a, m);
        for c in 0..nc {
            for r in c..m {
                assert!((f[c * m + r] - l[c * m + r]).abs() < 1e-10);
            }
        }
        // Schur complement equals L22 L22^T of the full factor
        for c in nc..m {
            for r in c..m {
                let s: f64 = (nc..=c).map(|k| l[k * m + r] * l[k * m + c]).sum();
                assert!((schur[(c - nc) * nr + r - nc] - s).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reports_failing_pivot() {
        let m = 3;
        let a = [4.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let mut f = a.to_vec();
        assert_eq!(partial_cholesky(&mut f, &mut [], m, m), Err(1));
    }

    #[test]
    fn triangular_solves_and_inverse() {
        let m = 9;
        let a = spd(m, 3);
        let l = reference_cholesky(&a, m);
        let b: Vec<f64> = (0..m).map(|k| k as f64 - 3.0).collect();
        let mut x = b.clone();
        solve_lower(&l, m, m, &mut x);
        for r in 0..m {
            let lx: f64 = (0..=r).map(|c| l[c * m + r] * x[c]).sum();
            assert!((lx - b[r]).abs() < 1e-12);
        }
        let mut y = b.clone();
        solve_lower_transpose(&l, m, m, &mut y);
        for r in 0..m {
            let lty: f64 = (r..m).map(|c| l[r * m + c] * y[c]).sum();
            assert!((lty - b[r]).abs() < 1e-12);
        }
        let inv = lower_inverse(&l, m, m);
        for r in 0..m {
            for c in 0..m {
                let p: f64 = (0..m).map(|k| l[k * m + r] * inv[c * m + k]).sum();
                assert!((p - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
