//! SVD of a paired-train operator without forming its unfolding matrix.
//! The interleaved train is reordered so row modes precede column modes,
//! the environment of the middle junction is orthonormalized, and one small
//! SVD at that junction yields the singular values of the unfolding together
//! with train-format singular vectors.

use super::{
    contract_first, fold_left, left_unfold, right_unfold, tt_to_nptt, PairedTensorTrain,
    TensorTrain, DENSE_BUDGET,
};
use crate::error::{Error, Result};
use crate::linalg::{self, mat_from_colmajor};
use ndarray::prelude::*;

/// Relative asymmetry above which an operator is rejected as an
/// eigendecomposition candidate.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// One singular value with its singular vectors as trains over the row and
/// column shapes of the operator.
#[derive(Debug, Clone)]
pub struct SingularTriple {
    pub sigma: f64,
    pub left: TensorTrain,
    pub right: TensorTrain,
}

/// Thin factors of the unfolding: `unfold(A) ~ left * diag(sigmas) * right^T`.
#[derive(Debug, Clone)]
pub struct TsvdFactors {
    pub sigmas: Vec<f64>,
    pub left: Array2<f64>,
    pub right: Array2<f64>,
}

struct PivotSvd {
    left_cores: Vec<Array3<f64>>,
    right_cores: Vec<Array3<f64>>,
    sigmas: Vec<f64>,
}

fn pivot_svd(
    a: &PairedTensorTrain,
    tol: f64,
    max_rank: Option<usize>,
    cap_swaps: bool,
) -> Result<PivotSvd> {
    let pairs = a.order();
    let tt = a.to_interleaved_tt(0.0)?;
    let swap_cap = if cap_swaps { max_rank } else { None };
    let mut t = tt_to_nptt(&tt, pairs, tol * 1e-2, swap_cap)?;
    if pairs >= 2 {
        t.left_orthonormalize_range(0, pairs - 2)?;
    }
    t.right_orthonormalize_downto(pairs)?;
    let pivot = pairs - 1;
    let m = left_unfold(&t.cores()[pivot]);
    let (u, s, vt) = linalg::svd_econ(&m)?;
    let keep = linalg::retained_count(&s, tol, max_rank);
    let (r_prev, jn, _) = t.cores()[pivot].dim();
    let mut left_cores: Vec<Array3<f64>> = t.cores()[..pivot].to_vec();
    left_cores.push(fold_left(&u.slice(s![.., ..keep]), r_prev, jn, keep));
    let vt_keep = vt.slice(s![..keep, ..]).to_owned();
    let mut right_cores: Vec<Array3<f64>> = t.cores()[pairs..].to_vec();
    right_cores[0] = contract_first(&vt_keep.view(), &right_cores[0]);
    Ok(PivotSvd {
        left_cores,
        right_cores,
        sigmas: s.iter().take(keep).copied().collect(),
    })
}

/// Singular triples of the operator's unfolding, largest first. Values below
/// `tol` relative to the largest are dropped; `max_rank` caps the count.
pub fn etsvd(
    a: &PairedTensorTrain,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<Vec<SingularTriple>> {
    let piv = pivot_svd(a, tol, max_rank, false)?;
    let mut out = Vec::with_capacity(piv.sigmas.len());
    for (r, &sigma) in piv.sigmas.iter().enumerate() {
        let mut lc = piv.left_cores.clone();
        let sliced = lc.last().unwrap().slice(s![.., .., r..r + 1]).to_owned();
        *lc.last_mut().unwrap() = sliced;
        let mut rc = piv.right_cores.clone();
        rc[0] = rc[0].slice(s![r..r + 1, .., ..]).to_owned();
        out.push(SingularTriple {
            sigma,
            left: TensorTrain::from_cores(lc)?,
            right: TensorTrain::from_cores(rc)?,
        });
    }
    Ok(out)
}

/// Contract a left-boundary run of cores into a (prod of modes, last rank)
/// matrix whose columns are the vectorized rank slices.
fn contract_prefix(cores: &[Array3<f64>]) -> Result<Array2<f64>> {
    let mut carry: Vec<f64> = vec![1.0];
    let mut prefix = 1usize;
    let mut r_prev = 1usize;
    for core in cores {
        let (_, j, q) = core.dim();
        if prefix * j * q > DENSE_BUDGET {
            return Err(Error::CapacityExceeded {
                needed: prefix * j * q,
                budget: DENSE_BUDGET,
            });
        }
        let w = mat_from_colmajor(prefix, r_prev, carry);
        let prod = w.dot(&right_unfold(core));
        let mut next = vec![0.0; prefix * j * q];
        for cq in 0..q {
            for cj in 0..j {
                for p in 0..prefix {
                    next[p + prefix * cj + prefix * j * cq] = prod[[p, cj + j * cq]];
                }
            }
        }
        carry = next;
        prefix *= j;
        r_prev = q;
    }
    Ok(mat_from_colmajor(prefix, r_prev, carry))
}

/// Contract a right-boundary run of cores into a (first rank, prod of modes)
/// matrix whose rows are the vectorized rank slices.
fn contract_suffix(cores: &[Array3<f64>]) -> Result<Array2<f64>> {
    let mut carry: Vec<f64> = vec![1.0];
    let mut suffix = 1usize;
    let mut r_next = 1usize;
    for core in cores.iter().rev() {
        let (r, j, _) = core.dim();
        if r * j * suffix > DENSE_BUDGET {
            return Err(Error::CapacityExceeded {
                needed: r * j * suffix,
                budget: DENSE_BUDGET,
            });
        }
        let w = mat_from_colmajor(r_next, suffix, carry);
        let prod = left_unfold(core).dot(&w);
        let mut next = vec![0.0; r * j * suffix];
        for sfx in 0..suffix {
            for cj in 0..j {
                for cr in 0..r {
                    next[cr + r * (cj + j * sfx)] = prod[[cr + r * cj, sfx]];
                }
            }
        }
        carry = next;
        suffix *= j;
        r_next = r;
    }
    Ok(mat_from_colmajor(r_next, suffix, carry))
}

/// Same decomposition as `etsvd` but with the singular vectors materialized
/// as thin dense factors of the unfolding. Here `max_rank` is a working
/// budget: it bounds the intermediate reordering ranks as well as the factor
/// width, so a capped request stays cheap even when the operator carries a
/// long noise tail.
pub fn etsvd_factors(
    a: &PairedTensorTrain,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<TsvdFactors> {
    let piv = pivot_svd(a, tol, max_rank, true)?;
    let left = contract_prefix(&piv.left_cores)?;
    let right = contract_suffix(&piv.right_cores)?;
    Ok(TsvdFactors {
        sigmas: piv.sigmas,
        left,
        right: right.t().to_owned(),
    })
}

/// Eigendecomposition of a weakly symmetric positive semidefinite operator:
/// eigenvalues equal singular values and eigenvectors equal left singular
/// vectors. Rejects operators whose relative asymmetry exceeds the gate.
pub fn u_eigendecompose_psd(
    a: &PairedTensorTrain,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<Vec<(f64, TensorTrain)>> {
    if a.row_shape() != a.col_shape() {
        return Err(Error::ShapeMismatch(
            "eigendecomposition of a non-square operator".into(),
        ));
    }
    let norm = a.norm()?;
    if norm > 0.0 {
        let skew = a.add(&a.transpose().scaled(-1.0))?.norm()?;
        if skew / norm > SYMMETRY_TOL {
            return Err(Error::NotSymmetric {
                asymmetry: skew / norm,
            });
        }
    }
    let triples = etsvd(a, tol, max_rank)?;
    Ok(triples.into_iter().map(|t| (t.sigma, t.left)).collect())
}
