//! Arithmetic on trains: sums, contractions, transposes, block stacking,
//! and application of paired-train operators to states.

use super::{PairedTensorTrain, TensorTrain};
use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::shape::{Factorization, Shape};
use ndarray::prelude::*;

impl TensorTrain {
    /// Sum of two trains over the same shape. Interior ranks add.
    pub fn add(&self, other: &TensorTrain) -> Result<TensorTrain> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::ShapeMismatch(
                "sum of trains over different shapes".into(),
            ));
        }
        let d = self.order();
        if d == 1 {
            return TensorTrain::from_cores(vec![&self.cores()[0] + &other.cores()[0]]);
        }
        let mut cores = Vec::with_capacity(d);
        for n in 0..d {
            let a = &self.cores()[n];
            let b = &other.cores()[n];
            let (ra, j, qa) = a.dim();
            let (rb, _, qb) = b.dim();
            let core = if n == 0 {
                let mut c = Array3::zeros((1, j, qa + qb));
                c.slice_mut(s![.., .., ..qa]).assign(a);
                c.slice_mut(s![.., .., qa..]).assign(b);
                c
            } else if n == d - 1 {
                let mut c = Array3::zeros((ra + rb, j, 1));
                c.slice_mut(s![..ra, .., ..]).assign(a);
                c.slice_mut(s![ra.., .., ..]).assign(b);
                c
            } else {
                let mut c = Array3::zeros((ra + rb, j, qa + qb));
                c.slice_mut(s![..ra, .., ..qa]).assign(a);
                c.slice_mut(s![ra.., .., qa..]).assign(b);
                c
            };
            cores.push(core);
        }
        TensorTrain::from_cores(cores)
    }

    pub fn scaled(&self, alpha: f64) -> TensorTrain {
        let mut t = self.clone();
        t.scale(alpha);
        t
    }
}

impl PairedTensorTrain {
    pub fn add(&self, other: &PairedTensorTrain) -> Result<PairedTensorTrain> {
        let sum = self.to_fused().add(&other.to_fused())?;
        PairedTensorTrain::from_fused(&sum, &self.row_shape(), &self.col_shape())
    }

    pub fn scaled(&self, alpha: f64) -> PairedTensorTrain {
        let mut t = self.clone();
        t.scale(alpha);
        t
    }

    /// Identity operator on the given shape, rank 1.
    pub fn identity(shape: &Shape) -> PairedTensorTrain {
        let cores = shape
            .sizes()
            .iter()
            .map(|&j| {
                let mut c = Array4::zeros((1, j, j, 1));
                for v in 0..j {
                    c[[0, v, v, 0]] = 1.0;
                }
                c
            })
            .collect();
        PairedTensorTrain::from_cores(cores).expect("identity cores are valid")
    }

    /// Swap the row and column mode of every core.
    pub fn transpose(&self) -> PairedTensorTrain {
        let cores = self
            .cores()
            .iter()
            .map(|c| c.clone().permuted_axes([0, 2, 1, 3]).as_standard_layout().to_owned())
            .collect();
        PairedTensorTrain::from_cores(cores).expect("transpose keeps ranks")
    }

    /// Mode-wise product contracting this train's column modes against the
    /// other's row modes. Interior ranks multiply.
    pub fn einstein(&self, other: &PairedTensorTrain) -> Result<PairedTensorTrain> {
        if self.col_shape() != other.row_shape() {
            return Err(Error::ShapeMismatch(format!(
                "contraction shapes {} and {} do not match",
                self.col_shape(),
                other.row_shape()
            )));
        }
        let d = self.order();
        let mut cores = Vec::with_capacity(d);
        for n in 0..d {
            let a = &self.cores()[n];
            let b = &other.cores()[n];
            let (ra, j, k, qa) = a.dim();
            let (rb, _, i, qb) = b.dim();
            let mut c = Array4::zeros((ra * rb, j, i, qa * qb));
            for cqb in 0..qb {
                for cqa in 0..qa {
                    for ci in 0..i {
                        for cj in 0..j {
                            for crb in 0..rb {
                                for cra in 0..ra {
                                    let mut acc = 0.0;
                                    for ck in 0..k {
                                        acc += a[[cra, cj, ck, cqa]] * b[[crb, ck, ci, cqb]];
                                    }
                                    c[[cra + ra * crb, cj, ci, cqa + qa * cqb]] = acc;
                                }
                            }
                        }
                    }
                }
            }
            cores.push(c);
        }
        PairedTensorTrain::from_cores(cores)
    }

    /// Apply the operator to a dense state: y = A * x contracting every
    /// column mode of A against the matching mode of x.
    pub fn apply_dense(&self, x: &DenseTensor) -> Result<DenseTensor> {
        if self.col_shape() != *x.shape() {
            return Err(Error::ShapeMismatch(format!(
                "operator columns {} against state {}",
                self.col_shape(),
                x.shape()
            )));
        }
        let d = self.order();
        // Carry buffer, column-major over digits (j_1..j_{n-1}, r_{n-1}, i_n..i_N).
        let mut carry: Vec<f64> = x.data().to_vec();
        let mut prefix = 1usize; // product of processed row modes
        let mut r_prev = 1usize;
        let mut suffix: usize = x.shape().total(); // product of remaining col modes
        for n in 0..d {
            let core = &self.cores()[n];
            let (_, j, i, q) = core.dim();
            suffix /= i;
            // K[(r + r_prev*i), (j + j*... )]: rows (r, i_n), cols (j_n, r_n).
            let mut k_mat = Array2::<f64>::zeros((r_prev * i, j * q));
            for cq in 0..q {
                for cj in 0..j {
                    for ci in 0..i {
                        for cr in 0..r_prev {
                            k_mat[[cr + r_prev * ci, cj + j * cq]] = core[[cr, cj, ci, cq]];
                        }
                    }
                }
            }
            let mid = r_prev * i;
            let out_cols = j * q;
            let mut next = vec![0.0; prefix * out_cols * suffix];
            for sfx in 0..suffix {
                let base = prefix * mid * sfx;
                let m = ndarray::ArrayView2::from_shape(
                    (prefix, mid).f(),
                    &carry[base..base + prefix * mid],
                )
                .map_err(|e| Error::InvalidShape(e.to_string()))?;
                let prod = m.dot(&k_mat); // (prefix, j*q)
                let out_base = prefix * out_cols * sfx;
                for c in 0..out_cols {
                    for p in 0..prefix {
                        next[out_base + p + prefix * c] = prod[[p, c]];
                    }
                }
            }
            carry = next;
            prefix *= j;
            r_prev = q;
        }
        DenseTensor::new(self.row_shape(), carry)
    }

    /// Apply the operator to a train state: per-core contraction of column
    /// modes, ranks multiply.
    pub fn apply_tt(&self, x: &TensorTrain) -> Result<TensorTrain> {
        if self.col_shape().sizes() != x.mode_sizes() {
            return Err(Error::ShapeMismatch(format!(
                "operator columns {} against state train {}",
                self.col_shape(),
                x.shape()
            )));
        }
        let d = self.order();
        let mut cores = Vec::with_capacity(d);
        for n in 0..d {
            let a = &self.cores()[n];
            let b = &x.cores()[n];
            let (ra, j, i, qa) = a.dim();
            let (rb, _, qb) = b.dim();
            let mut c = Array3::zeros((ra * rb, j, qa * qb));
            for cqb in 0..qb {
                for cqa in 0..qa {
                    for cj in 0..j {
                        for crb in 0..rb {
                            for cra in 0..ra {
                                let mut acc = 0.0;
                                for ci in 0..i {
                                    acc += a[[cra, cj, ci, cqa]] * b[[crb, ci, cqb]];
                                }
                                c[[cra + ra * crb, cj, cqa + qa * cqb]] = acc;
                            }
                        }
                    }
                }
            }
            cores.push(c);
        }
        TensorTrain::from_cores(cores)
    }
}

/// Stack trains along column mode `mode`: block k occupies the column slab
/// k*I..(k+1)*I of that mode. Interior ranks add across blocks.
pub fn block_tt_row_n(blocks: &[PairedTensorTrain], mode: usize) -> Result<PairedTensorTrain> {
    if blocks.is_empty() {
        return Err(Error::InvalidShape("no blocks to stack".into()));
    }
    let d = blocks[0].order();
    if mode >= d {
        return Err(Error::ModeOutOfRange { mode, order: d });
    }
    for b in blocks {
        if b.row_shape() != blocks[0].row_shape() || b.col_shape() != blocks[0].col_shape() {
            return Err(Error::ShapeMismatch("blocks differ in shape".into()));
        }
    }
    let count = blocks.len();
    let mut acc: Option<PairedTensorTrain> = None;
    for (k, b) in blocks.iter().enumerate() {
        let mut cores: Vec<Array4<f64>> = b.cores().to_vec();
        let (r, j, i, q) = cores[mode].dim();
        let mut padded = Array4::zeros((r, j, count * i, q));
        padded
            .slice_mut(s![.., .., k * i..(k + 1) * i, ..])
            .assign(&cores[mode]);
        cores[mode] = padded;
        let t = PairedTensorTrain::from_cores(cores)?;
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    Ok(acc.unwrap())
}

/// Stack a full multi-index family of blocks along every column mode at
/// once, following the blocking pattern of `fact`. Blocks are given in
/// column-major order of their block multi-indices.
pub fn block_tt_row(blocks: &[PairedTensorTrain], fact: &Factorization) -> Result<PairedTensorTrain> {
    if blocks.is_empty() {
        return Err(Error::InvalidShape("no blocks to stack".into()));
    }
    let d = blocks[0].order();
    if fact.order() != d {
        return Err(Error::InvalidFactorization(format!(
            "blocking of order {} for trains of order {}",
            fact.order(),
            d
        )));
    }
    if blocks.len() != fact.total() {
        return Err(Error::ShapeMismatch(format!(
            "{} blocks for a {} blocking",
            blocks.len(),
            fact.total()
        )));
    }
    let counts = fact.counts().to_vec();
    let block_shape = Shape::new(counts.clone())?;
    let mut acc: Option<PairedTensorTrain> = None;
    for (lin, b) in blocks.iter().enumerate() {
        let k = block_shape.delinearize(lin);
        let mut cores: Vec<Array4<f64>> = b.cores().to_vec();
        for (n, core) in cores.iter_mut().enumerate() {
            let (r, j, i, q) = core.dim();
            let mut padded = Array4::zeros((r, j, counts[n] * i, q));
            padded
                .slice_mut(s![.., .., k[n] * i..(k[n] + 1) * i, ..])
                .assign(core);
            *core = padded;
        }
        let t = PairedTensorTrain::from_cores(cores)?;
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    Ok(acc.unwrap())
}

/// Extract block `k` (linearized column-major over the block counts) of a
/// train whose column modes follow the blocking pattern `fact`: slice the
/// column slab of every core. Ranks are unchanged.
pub fn block_tt_extract(
    t: &PairedTensorTrain,
    fact: &Factorization,
    k: usize,
) -> Result<PairedTensorTrain> {
    let d = t.order();
    if fact.order() != d {
        return Err(Error::InvalidFactorization(format!(
            "blocking of order {} for a train of order {}",
            fact.order(),
            d
        )));
    }
    if k >= fact.total() {
        return Err(Error::InvalidConfig(format!(
            "block {} of {}",
            k,
            fact.total()
        )));
    }
    let base = fact.base_of(&t.col_shape())?;
    let idx = fact.as_shape().delinearize(k);
    let mut cores = Vec::with_capacity(d);
    for n in 0..d {
        let i = base.size(n);
        let core = t.cores()[n]
            .slice(s![.., .., idx[n] * i..(idx[n] + 1) * i, ..])
            .to_owned();
        cores.push(core);
    }
    PairedTensorTrain::from_cores(cores)
}

/// Estimate the spectral radius of a paired-train operator by normalized
/// power iteration with rounding, averaging growth over the trailing half of
/// the run.
pub fn power_radius(
    a: &PairedTensorTrain,
    steps: usize,
    round_tol: f64,
    max_rank: usize,
    seed: u64,
) -> Result<f64> {
    let col = a.col_shape();
    let interior: Vec<usize> = vec![2; col.order().saturating_sub(1)];
    let mut x = TensorTrain::random(&col, &interior, seed)?;
    let n0 = x.norm()?;
    if n0 == 0.0 {
        return Err(Error::Numerical("zero start vector".into()));
    }
    x.scale(1.0 / n0);
    let mut growths = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut y = a.apply_tt(&x)?;
        y.round(round_tol, Some(max_rank))?;
        let ny = y.norm()?;
        if ny == 0.0 {
            return Ok(0.0);
        }
        y.scale(1.0 / ny);
        growths.push(ny);
        x = y;
    }
    let tail = &growths[growths.len() / 2..];
    let log_mean = tail.iter().map(|g| g.ln()).sum::<f64>() / tail.len() as f64;
    Ok(log_mean.exp())
}
