//! Dense kernels: blocked Householder QR for least-squares residuals and
//! symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

const PANEL: usize = 32;
/// A column whose remaining norm falls below this fraction of its original
/// norm is treated as linearly dependent and skipped.
pub const RANK_TOL: f64 = 1e-9;

/// Result of projecting target columns onto the span of a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QrResiduals {
    pub rank: usize,
    /// ||y||^2 for each target column.
    pub target_norm2: Vec<f64>,
    /// ||Q1^T y||^2, the energy captured by the column span.
    pub captured: Vec<f64>,
    /// ||y - A p*||^2 = ||y||^2 - ||Q1^T y||^2, clamped at zero.
    pub residual: Vec<f64>,
}

/// `C -= V * T^T * (V^T * C)` on raw column-major storage.
///
/// `v` is `m x k` (leading dim `m`), `t` is `k x k` upper triangular (leading dim `k`),
/// `c` is `m x n` with leading dimension `ldc`.
#[allow(clippy::too_many_arguments)]
fn apply_block_reflector_t(
    m: usize,
    k: usize,
    n: usize,
    v: &[f64],
    t: &[f64],
    c: *mut f64,
    ldc: usize,
    work: &mut Vec<f64>,
    work2: &mut Vec<f64>,
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    work.clear();
    work.resize(k * n, 0.0);
    work2.clear();
    work2.resize(k * n, 0.0);
    // SAFETY: all pointers address live buffers of the stated shapes and strides;
    // `c` does not alias `v`, `t`, `work` or `work2`.
    unsafe {
        // W = V^T C  (k x n)
        matrixmultiply::dgemm(
            k,
            m,
            n,
            1.0,
            v.as_ptr(),
            m as isize,
            1,
            c,
            1,
            ldc as isize,
            0.0,
            work.as_mut_ptr(),
            1,
            k as isize,
        );
        // W2 = T^T W
        matrixmultiply::dgemm(
            k,
            k,
            n,
            1.0,
            t.as_ptr(),
            k as isize,
            1,
            work.as_ptr(),
            1,
            k as isize,
            0.0,
            work2.as_mut_ptr(),
            1,
            k as isize,
        );
        // C -= V W2
        matrixmultiply::dgemm(
            m,
            k,
            n,
            -1.0,
            v.as_ptr(),
            1,
            m as isize,
            work2.as_ptr(),
            1,
            k as isize,
            1.0,
            c,
            1,
            ldc as isize,
        );
    }
}

/// Householder vector for `x` with v[0] = 1. Returns (tau, beta) so that
/// (I - tau v v^T) x = beta e1; `x` is overwritten with v.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let tail2: f64 = x[1..].iter().map(|v| v * v).sum();
    if tail2 == 0.0 {
        x[0] = 1.0;
        return (0.0, alpha);
    }
    let norm = (alpha * alpha + tail2).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let scale = 1.0 / (alpha - beta);
    x[1..].iter_mut().for_each(|v| *v *= scale);
    x[0] = 1.0;
    ((beta - alpha) / beta, beta)
}

/// Thin-QR residuals of the targets stored after the first `ncols` columns of `aug`.
///
/// `aug` is `m x (ncols + k)` column-major and is overwritten. Columns of the
/// design that are numerically dependent on earlier ones are skipped, so the
/// orthonormal factor spans exactly the column space.
pub fn qr_residuals(mut aug: DMatrix<f64>, ncols: usize) -> QrResiduals {
    let m = aug.nrows();
    let total = aug.ncols();
    assert!(ncols <= total, "design width exceeds augmented matrix");
    let k = total - ncols;
    let target_norm2: Vec<f64> = (ncols..total)
        .map(|j| aug.column(j).norm_squared())
        .collect();
    let orig: Vec<f64> = (0..ncols).map(|j| aug.column(j).norm()).collect();

    let mut row = 0usize;
    let mut vbuf: Vec<f64> = Vec::new();
    let mut taus: Vec<f64> = Vec::with_capacity(PANEL);
    let mut tbuf: Vec<f64> = Vec::new();
    let mut work = Vec::new();
    let mut work2 = Vec::new();
    let mut p0 = 0;
    while p0 < ncols && row < m {
        let p1 = (p0 + PANEL).min(ncols);
        let row0 = row;
        let mr = m - row0;
        vbuf.clear();
        taus.clear();
        for j in p0..p1 {
            if row >= m {
                break;
            }
            let col = &mut aug.column_mut(j);
            let rem: f64 = col.rows(row, m - row).norm();
            if orig[j] == 0.0 || rem <= RANK_TOL * orig[j] {
                continue;
            }
            let mut x: Vec<f64> = col.rows(row, m - row).iter().copied().collect();
            let (tau, beta) = householder(&mut x);
            col[row] = beta;
            for r in row + 1..m {
                col[r] = 0.0;
            }
            // Apply to the remaining panel columns.
            for jj in j + 1..p1 {
                let mut cj = aug.column_mut(jj);
                let mut s = 0.0;
                for (r, xv) in x.iter().enumerate() {
                    s += xv * cj[row + r];
                }
                s *= tau;
                if s != 0.0 {
                    for (r, xv) in x.iter().enumerate() {
                        cj[row + r] -= s * xv;
                    }
                }
            }
            let off = row - row0;
            vbuf.extend(std::iter::repeat_n(0.0, off));
            vbuf.extend_from_slice(&x);
            taus.push(tau);
            row += 1;
        }
        let kb = taus.len();
        if kb > 0 && p1 < total {
            // Compact WY: H_1 ... H_kb = I - V T V^T.
            tbuf.clear();
            tbuf.resize(kb * kb, 0.0);
            for i in 0..kb {
                let vi = &vbuf[i * mr..(i + 1) * mr];
                let mut z = vec![0.0; i];
                for (p, zp) in z.iter_mut().enumerate() {
                    let vp = &vbuf[p * mr..(p + 1) * mr];
                    *zp = vp.iter().zip(vi).map(|(a, b)| a * b).sum::<f64>();
                }
                for r in 0..i {
                    let mut acc = 0.0;
                    for (p, zp) in z.iter().enumerate().skip(r) {
                        acc += tbuf[r + p * kb] * zp;
                    }
                    tbuf[r + i * kb] = -taus[i] * acc;
                }
                tbuf[i + i * kb] = taus[i];
            }
            let ld = m;
            let ptr = unsafe { aug.as_mut_ptr().add(row0 + p1 * ld) };
            apply_block_reflector_t(mr, kb, total - p1, &vbuf, &tbuf, ptr, ld, &mut work, &mut work2);
        }
        p0 = p1;
    }
    let rank = row;
    let mut captured = Vec::with_capacity(k);
    let mut residual = Vec::with_capacity(k);
    for (c, &y2) in (ncols..total).zip(&target_norm2) {
        let col = aug.column(c);
        let head: f64 = col.rows(0, rank).norm_squared();
        let tail: f64 = col.rows(rank, m - rank).norm_squared();
        captured.push(head);
        // The complement norm equals ||y||^2 - ||Q1^T y||^2 without the cancellation.
        residual.push(tail.max(0.0).min(y2));
    }
    QrResiduals {
        rank,
        target_norm2,
        captured,
        residual,
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, vectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(a: &DMatrix<f64>) -> Option<SymEigen> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 64 * n.max(16))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Some(SymEigen { values, vectors })
}

/// Flips `v` so its largest-magnitude component is positive (first one on ties).
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `acc += B^T B` (upper and lower) for row-major `b` of shape `rows x n`.
pub(crate) fn syrk_acc(acc: &mut [f64], b: &[f64], rows: usize, n: usize) {
    debug_assert_eq!(acc.len(), n * n);
    debug_assert_eq!(b.len(), rows * n);
    // SAFETY: shapes match the buffers; acc does not alias b.
    unsafe {
        matrixmultiply::dgemm(
            n,
            rows,
            n,
            1.0,
            b.as_ptr(),
            1,
            n as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            acc.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `acc += B^T Y` for row-major `b` (`rows x n`) and `y` (`rows x k`); `acc` is `n x k` row-major.
pub(crate) fn gemm_tn_acc(acc: &mut [f64], b: &[f64], y: &[f64], rows: usize, n: usize, k: usize) {
    debug_assert_eq!(acc.len(), n * k);
    debug_assert_eq!(y.len(), rows * k);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            rows,
            k,
            1.0,
            b.as_ptr(),
            1,
            n as isize,
            y.as_ptr(),
            k as isize,
            1,
            1.0,
            acc.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}
