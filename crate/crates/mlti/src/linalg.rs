//! Thin wrappers around LAPACK (via ndarray-linalg) with the deterministic
//! conventions used throughout the crate: singular values descending, each
//! left singular vector normalized so its largest-magnitude entry is
//! positive, and a hard relative floor below which singular values are
//! never retained.

use crate::error::{Error, Result};
use ndarray::prelude::*;
use ndarray_linalg::{Eig, Eigh, JobSvd, SVDDC, QR, SVD, UPLO};
use num_complex::Complex64;

/// Relative floor: singular values at or below `SIGMA_FLOOR * sigma_1`
/// are treated as numerically zero and never retained.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Build a matrix from column-major data.
pub fn mat_from_colmajor(rows: usize, cols: usize, data: Vec<f64>) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols).f(), data).expect("length mismatch in mat_from_colmajor")
}

/// Column-major copy of a matrix.
pub fn colmajor_of(m: &ArrayView2<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for col in m.axis_iter(Axis(1)) {
        out.extend(col.iter().copied());
    }
    out
}

/// Flip signs so the largest-magnitude entry of each column of `u` is
/// positive; `vt` rows are flipped to compensate.
fn fix_signs(u: &mut Array2<f64>, vt: &mut Array2<f64>) {
    let r = u.ncols().min(vt.nrows());
    for c in 0..r {
        let col = u.column(c);
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(c).mapv_inplace(|v| -v);
            vt.row_mut(c).mapv_inplace(|v| -v);
        }
    }
}

/// Economy SVD `m = u * diag(s) * vt` with `min(rows, cols)` columns in `u`,
/// descending singular values and deterministic signs. Falls back from the
/// divide-and-conquer driver to the standard one if the former fails.
pub fn svd_econ(m: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    let (rows, cols) = m.dim();
    // Tall or wide matrices go through a QR/LQ step first; LAPACK then only
    // sees a square factor.
    let (mut u, s, mut vt) = if rows > 4 * cols.max(8) && cols > 1 {
        let (q, r) = qr_econ(m)?;
        let (u_r, s, vt) = svd_econ(&r)?;
        (q.dot(&u_r), s, vt)
    } else if cols > 4 * rows.max(8) && rows > 1 {
        let (l, q) = lq_econ(m)?;
        let (u, s, vt_l) = svd_econ(&l)?;
        (u, s, vt_l.dot(&q))
    } else {
        match m.svddc(JobSvd::Some) {
            Ok((Some(u), s, Some(vt))) => (u, s.to_vec(), vt),
            _ => {
                let (u, s, vt) = m.svd(true, true)?;
                (u.unwrap(), s.to_vec(), vt.unwrap())
            }
        }
    };
    fix_signs(&mut u, &mut vt);
    Ok((u, s, vt))
}

/// Economy QR: `m = q * r` with `q` having `min(rows, cols)` orthonormal
/// columns.
pub fn qr_econ(m: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (q, r) = m.qr()?;
    Ok((q, r))
}

/// Economy LQ: `m = l * q` with `q` having `min(rows, cols)` orthonormal
/// rows. Computed as the transpose of a QR factorization.
pub fn lq_econ(m: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let mt = m.t().to_owned();
    let (q, r) = mt.qr()?;
    Ok((r.t().to_owned(), q.t().to_owned()))
}

/// Number of singular values retained at relative tolerance `rel_tol`
/// (with the hard floor applied) capped at `max_rank`. A tolerance of zero
/// keeps everything above the floor. At least one value is retained.
pub fn retained_count(s: &[f64], rel_tol: f64, max_rank: Option<usize>) -> usize {
    if s.is_empty() {
        return 0;
    }
    let s1 = s[0];
    let cut = (rel_tol.max(SIGMA_FLOOR)) * s1;
    let mut r = s.iter().take_while(|&&v| v > cut).count();
    if let Some(cap) = max_rank {
        r = r.min(cap);
    }
    r.max(1)
}

/// Number of leading singular values kept so that the Frobenius norm of the
/// dropped tail is at most `delta`. The hard floor is still applied.
pub fn retained_count_frobenius(s: &[f64], delta: f64, max_rank: Option<usize>) -> usize {
    if s.is_empty() {
        return 0;
    }
    let floor = SIGMA_FLOOR * s[0];
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let v = s[r - 1];
        if v <= floor {
            r -= 1;
            continue;
        }
        if (tail + v * v).sqrt() <= delta {
            tail += v * v;
            r -= 1;
        } else {
            break;
        }
    }
    if let Some(cap) = max_rank {
        r = r.min(cap);
    }
    r.max(1)
}

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(m: &Array2<f64>) -> Result<Vec<Complex64>> {
    let (vals, _) = m.eig()?;
    Ok(vals.to_vec())
}

/// Spectral radius of a general square matrix.
pub fn spectral_radius(m: &Array2<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn eigh_sym(m: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    Ok((vals.to_vec(), vecs))
}

/// Largest singular value of a complex matrix.
pub fn sigma_max_complex(m: &Array2<Complex64>) -> Result<f64> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.iter().copied().fold(0.0, f64::max))
}

/// Solve `a x = b` for complex square `a` and complex right-hand sides `b`.
/// Fails when the solve is numerically unreliable.
pub fn solve_complex(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    use ndarray_linalg::Solve;
    let mut x = Array2::zeros(b.dim());
    for (k, col) in b.axis_iter(Axis(1)).enumerate() {
        let xk = a.solve(&col.to_owned())?;
        x.column_mut(k).assign(&xk);
    }
    // Residual check guards against a silently ill-conditioned solve.
    let res = a.dot(&x) - b;
    let scale = frob_c(b).max(frob_c(&a.dot(&x)));
    if scale > 0.0 && frob_c(&res) / scale > 1e-6 {
        return Err(Error::SingularUnfolding {
            cond: frob_c(&res) / scale,
        });
    }
    Ok(x)
}

fn frob_c(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
