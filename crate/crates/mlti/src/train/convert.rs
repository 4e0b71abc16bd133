//! Conversions between train layouts: splitting paired cores into
//! interleaved single-mode cores, reordering an interleaved train so all row
//! modes precede all column modes, and quantizing mode sizes into prime
//! factors.

use super::{fold_left, fold_right, PairedTensorTrain, TensorTrain};
use crate::error::{Error, Result};
use crate::linalg;
use crate::paired::PairedTensor;
use crate::shape::Shape;
use ndarray::prelude::*;

impl PairedTensorTrain {
    /// Split every four-way core into a row core and a column core by SVD,
    /// giving an interleaved train over (J_1, I_1, ..., J_N, I_N). With
    /// `tol = 0` only numerically zero singular values are dropped.
    pub fn to_interleaved_tt(&self, tol: f64) -> Result<TensorTrain> {
        let mut cores = Vec::with_capacity(2 * self.order());
        for core in self.cores() {
            let (r, j, i, q) = core.dim();
            let mut m = Array2::zeros((r * j, i * q));
            for cq in 0..q {
                for ci in 0..i {
                    for cj in 0..j {
                        for cr in 0..r {
                            m[[cr + r * cj, ci + i * cq]] = core[[cr, cj, ci, cq]];
                        }
                    }
                }
            }
            let (u, s, vt) = linalg::svd_econ(&m)?;
            let fro = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let keep = linalg::retained_count_frobenius(&s, tol * fro, None);
            cores.push(fold_left(&u.slice(s![.., ..keep]), r, j, keep));
            let mut sv = vt.slice(s![..keep, ..]).to_owned();
            for (k, &sig) in s.iter().take(keep).enumerate() {
                sv.row_mut(k).mapv_inplace(|v| v * sig);
            }
            cores.push(fold_right(&sv.view(), keep, i, q));
        }
        TensorTrain::from_cores(cores)
    }
}

/// Exchange the modes carried by cores `p` and `p + 1`, truncating the new
/// junction at relative accuracy `rel_tol`. Assumes cores left of `p` are
/// left-orthonormal and cores right of `p + 1` right-orthonormal, so the
/// local truncation error equals the global one.
fn swap_left(t: &mut TensorTrain, p: usize, rel_tol: f64, max_rank: Option<usize>) -> Result<()> {
    let a = t.cores()[p].clone();
    let b = t.cores()[p + 1].clone();
    let (ra, ja, rm) = a.dim();
    let (_, jb, rb) = b.dim();
    let mut m = Array2::zeros((ra * jb, ja * rb));
    for crb in 0..rb {
        for cjb in 0..jb {
            for cja in 0..ja {
                for cra in 0..ra {
                    let mut acc = 0.0;
                    for crm in 0..rm {
                        acc += a[[cra, cja, crm]] * b[[crm, cjb, crb]];
                    }
                    m[[cra + ra * cjb, cja + ja * crb]] = acc;
                }
            }
        }
    }
    let (u, s, vt) = linalg::svd_econ(&m)?;
    let fro = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let keep = linalg::retained_count_frobenius(&s, rel_tol * fro, max_rank);
    let mut left = Array3::zeros((ra, jb, keep));
    for k in 0..keep {
        for cjb in 0..jb {
            for cra in 0..ra {
                left[[cra, cjb, k]] = u[[cra + ra * cjb, k]] * s[k];
            }
        }
    }
    let mut right = Array3::zeros((keep, ja, rb));
    for crb in 0..rb {
        for cja in 0..ja {
            for k in 0..keep {
                right[[k, cja, crb]] = vt[[k, cja + ja * crb]];
            }
        }
    }
    t.cores[p] = left;
    t.cores[p + 1] = right;
    Ok(())
}

/// Reorder an interleaved train (j_1, i_1, ..., j_N, i_N) into the
/// non-paired order (j_1, ..., j_N, i_1, ..., i_N) by adjacent mode swaps.
/// Column mode k moves left past k - 1 row modes; each swap truncates at
/// `tol` divided by the number of swaps, so the total relative error stays
/// within `tol`. `max_rank` caps every junction created by a swap; the
/// separation rank between rows and columns is the full matrix rank of the
/// unfolding, so uncapped sweeps can be far more expensive than the input.
pub fn tt_to_nptt(
    tt: &TensorTrain,
    pairs: usize,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<TensorTrain> {
    let d = tt.order();
    if d != 2 * pairs || pairs == 0 {
        return Err(Error::InvalidShape(format!(
            "train of order {} is not {} interleaved pairs",
            d, pairs
        )));
    }
    let mut t = tt.clone();
    if pairs == 1 {
        return Ok(t);
    }
    t.right_orthonormalize()?;
    let swaps = pairs * (pairs - 1) / 2;
    let per_swap = tol / swaps as f64;
    let mut left_done = 0usize;
    for k in 2..=pairs {
        let first_p = 2 * k - 3;
        if left_done < first_p {
            t.left_orthonormalize_range(left_done, first_p - 1)?;
        }
        for p in (k - 1..=first_p).rev() {
            swap_left(&mut t, p, per_swap, max_rank)?;
        }
        left_done = k - 1;
    }
    Ok(t)
}

/// Per-mode splitting of row and column sizes into small factors. Every
/// original mode pair (J_n, I_n) becomes a run of sub-pairs whose sizes
/// multiply back to (J_n, I_n); row and column factor lists of a pair have
/// equal length, padded with ones.
#[derive(Debug, Clone)]
pub struct QuantizationPlan {
    row_factors: Vec<Vec<usize>>,
    col_factors: Vec<Vec<usize>>,
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    if n == 1 {
        return vec![1];
    }
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl QuantizationPlan {
    pub fn new(row_factors: Vec<Vec<usize>>, col_factors: Vec<Vec<usize>>) -> Result<Self> {
        if row_factors.len() != col_factors.len() || row_factors.is_empty() {
            return Err(Error::InvalidFactorization(
                "row and column factor lists must align".into(),
            ));
        }
        for (r, c) in row_factors.iter().zip(&col_factors) {
            if r.is_empty() || r.len() != c.len() {
                return Err(Error::InvalidFactorization(
                    "factor runs of a pair must have equal nonzero length".into(),
                ));
            }
            if r.iter().chain(c).any(|&f| f == 0) {
                return Err(Error::InvalidFactorization("zero factor".into()));
            }
        }
        Ok(QuantizationPlan {
            row_factors,
            col_factors,
        })
    }

    /// Factor every mode size into ascending primes, padding the shorter
    /// list of each pair with trailing ones.
    pub fn auto(row_shape: &Shape, col_shape: &Shape) -> Result<Self> {
        if row_shape.order() != col_shape.order() {
            return Err(Error::ShapeMismatch(
                "row and column shapes differ in order".into(),
            ));
        }
        let mut row_factors = Vec::with_capacity(row_shape.order());
        let mut col_factors = Vec::with_capacity(col_shape.order());
        for n in 0..row_shape.order() {
            let mut r = prime_factors(row_shape.size(n));
            let mut c = prime_factors(col_shape.size(n));
            while r.len() < c.len() {
                r.push(1);
            }
            while c.len() < r.len() {
                c.push(1);
            }
            row_factors.push(r);
            col_factors.push(c);
        }
        QuantizationPlan::new(row_factors, col_factors)
    }

    pub fn validate(&self, row_shape: &Shape, col_shape: &Shape) -> Result<()> {
        if self.row_factors.len() != row_shape.order() || self.col_factors.len() != col_shape.order()
        {
            return Err(Error::InvalidFactorization(
                "plan order does not match tensor order".into(),
            ));
        }
        for n in 0..row_shape.order() {
            if self.row_factors[n].iter().product::<usize>() != row_shape.size(n)
                || self.col_factors[n].iter().product::<usize>() != col_shape.size(n)
            {
                return Err(Error::InvalidFactorization(format!(
                    "factors of pair {} do not multiply back to the mode sizes",
                    n
                )));
            }
        }
        Ok(())
    }

    pub fn quantized_row_shape(&self) -> Shape {
        Shape::new(self.row_factors.concat()).expect("factors are positive")
    }

    pub fn quantized_col_shape(&self) -> Shape {
        Shape::new(self.col_factors.concat()).expect("factors are positive")
    }
}

/// Reshape a paired tensor onto its quantized mode pairs. The unfolding
/// matrix is unchanged: sub-digits linearize back to the original indices.
pub fn quantized_paired(x: &PairedTensor, plan: &QuantizationPlan) -> Result<PairedTensor> {
    plan.validate(x.row_shape(), x.col_shape())?;
    let m = x.psi_unfold();
    PairedTensor::psi_fold(
        &m.view(),
        plan.quantized_row_shape(),
        plan.quantized_col_shape(),
    )
}

/// Undo `quantized_paired`.
pub fn unquantize_paired(
    q: &PairedTensor,
    plan: &QuantizationPlan,
    row_shape: &Shape,
    col_shape: &Shape,
) -> Result<PairedTensor> {
    if *q.row_shape() != plan.quantized_row_shape() || *q.col_shape() != plan.quantized_col_shape()
    {
        return Err(Error::ShapeMismatch(
            "tensor does not carry the plan's quantized shapes".into(),
        ));
    }
    plan.validate(row_shape, col_shape)?;
    let m = q.psi_unfold();
    PairedTensor::psi_fold(&m.view(), row_shape.clone(), col_shape.clone())
}

/// Decompose a paired tensor over its quantized modes.
pub fn quantize(
    x: &PairedTensor,
    plan: &QuantizationPlan,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<PairedTensorTrain> {
    let q = quantized_paired(x, plan)?;
    PairedTensorTrain::decompose(&q, tol, max_rank)
}
