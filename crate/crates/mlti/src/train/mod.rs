//! Tensor trains. `TensorTrain` carries three-way cores (rank, mode, rank)
//! for plain tensors; `PairedTensorTrain` carries four-way cores
//! (rank, row mode, column mode, rank) for paired tensors. Boundary ranks
//! are always 1. All unfoldings follow the column-major convention used by
//! the dense layer: within a core, earlier indices vary fastest.

mod convert;
mod ops;
mod tsvd;

pub use convert::{quantize, quantized_paired, tt_to_nptt, unquantize_paired, QuantizationPlan};
pub use ops::{block_tt_extract, block_tt_row, block_tt_row_n, power_radius};
pub use tsvd::{etsvd, etsvd_factors, u_eigendecompose_psd, SingularTriple, TsvdFactors, SYMMETRY_TOL};

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{self, mat_from_colmajor};
use crate::paired::PairedTensor;
use crate::shape::Shape;
use ndarray::prelude::*;

/// Entry budget for materializing compressed tensors densely.
pub const DENSE_BUDGET: usize = 1 << 25;

#[derive(Debug, Clone)]
pub struct TensorTrain {
    cores: Vec<Array3<f64>>,
}

#[derive(Debug, Clone)]
pub struct PairedTensorTrain {
    cores: Vec<Array4<f64>>,
}

/// Left unfolding of a core: rows (r + R*j), columns q.
pub(crate) fn left_unfold(core: &Array3<f64>) -> Array2<f64> {
    let (r, j, q) = core.dim();
    let mut data = Vec::with_capacity(r * j * q);
    for cq in 0..q {
        for cj in 0..j {
            for cr in 0..r {
                data.push(core[[cr, cj, cq]]);
            }
        }
    }
    mat_from_colmajor(r * j, q, data)
}

/// Right unfolding of a core: rows r, columns (j + J*q).
pub(crate) fn right_unfold(core: &Array3<f64>) -> Array2<f64> {
    let (r, j, q) = core.dim();
    let mut data = Vec::with_capacity(r * j * q);
    for cq in 0..q {
        for cj in 0..j {
            for cr in 0..r {
                data.push(core[[cr, cj, cq]]);
            }
        }
    }
    mat_from_colmajor(r, j * q, data)
}

/// Inverse of `left_unfold`.
pub(crate) fn fold_left(m: &ArrayView2<f64>, r: usize, j: usize, q: usize) -> Array3<f64> {
    let mut core = Array3::zeros((r, j, q));
    for cq in 0..q {
        for cj in 0..j {
            for cr in 0..r {
                core[[cr, cj, cq]] = m[[cr + r * cj, cq]];
            }
        }
    }
    core
}

/// Inverse of `right_unfold`.
pub(crate) fn fold_right(m: &ArrayView2<f64>, r: usize, j: usize, q: usize) -> Array3<f64> {
    let mut core = Array3::zeros((r, j, q));
    for cq in 0..q {
        for cj in 0..j {
            for cr in 0..r {
                core[[cr, cj, cq]] = m[[cr, cj + j * cq]];
            }
        }
    }
    core
}

/// Contract a matrix into the first rank index: core'[a, j, q] = sum_r m[a, r] core[r, j, q].
pub(crate) fn contract_first(m: &ArrayView2<f64>, core: &Array3<f64>) -> Array3<f64> {
    let (_, j, q) = core.dim();
    let prod = m.dot(&right_unfold(core));
    fold_right(&prod.view(), m.nrows(), j, q)
}

/// Contract a matrix into the last rank index: core'[r, j, b] = sum_q core[r, j, q] m[q, b].
pub(crate) fn contract_last(core: &Array3<f64>, m: &ArrayView2<f64>) -> Array3<f64> {
    let (r, j, _) = core.dim();
    let prod = left_unfold(core).dot(m);
    fold_left(&prod.view(), r, j, m.ncols())
}

impl TensorTrain {
    pub fn from_cores(cores: Vec<Array3<f64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidShape("train with no cores".into()));
        }
        if cores[0].dim().0 != 1 || cores.last().unwrap().dim().2 != 1 {
            return Err(Error::InvalidShape("boundary ranks must be 1".into()));
        }
        for w in cores.windows(2) {
            if w[0].dim().2 != w[1].dim().0 {
                return Err(Error::InvalidShape(format!(
                    "rank mismatch between cores: {} vs {}",
                    w[0].dim().2,
                    w[1].dim().0
                )));
            }
        }
        Ok(TensorTrain { cores })
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.mode_sizes()).expect("cores are nonempty")
    }

    /// All d+1 ranks including the unit boundary ranks.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = vec![1];
        r.extend(self.cores.iter().map(|c| c.dim().2));
        r
    }

    pub fn entry_count(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    /// Sequential-SVD decomposition of a dense tensor. The per-junction
    /// truncation budget is tol * |X| / sqrt(d - 1); `tol = 0` keeps the
    /// numerical ranks of the sequential unfoldings.
    pub fn decompose(x: &DenseTensor, tol: f64, max_rank: Option<usize>) -> Result<Self> {
        let sizes = x.shape().sizes().to_vec();
        let d = sizes.len();
        let norm = x.frobenius_norm();
        let delta = if d > 1 {
            tol * norm / ((d - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut cores = Vec::with_capacity(d);
        // Carry matrix, column-major, of shape (r_prev * J_n, rest).
        let mut carry: Vec<f64> = x.data().to_vec();
        let mut r_prev = 1usize;
        let mut rest: usize = sizes.iter().product();
        for &jn in sizes.iter().take(d - 1) {
            rest /= jn;
            let m = mat_from_colmajor(r_prev * jn, rest, carry);
            let (u, s, vt) = linalg::svd_econ(&m)?;
            let r = linalg::retained_count_frobenius(&s, delta, max_rank);
            cores.push(fold_left(&u.slice(s![.., ..r]), r_prev, jn, r));
            // carry = diag(s_r) * vt_r, column-major
            let mut next = Vec::with_capacity(r * rest);
            for c in 0..rest {
                for (k, &sv) in s.iter().take(r).enumerate() {
                    next.push(sv * vt[[k, c]]);
                }
            }
            carry = next;
            r_prev = r;
        }
        let jn = sizes[d - 1];
        let m = mat_from_colmajor(r_prev, jn, carry);
        let mut last = Array3::zeros((r_prev, jn, 1));
        for cj in 0..jn {
            for cr in 0..r_prev {
                last[[cr, cj, 0]] = m[[cr, cj]];
            }
        }
        cores.push(last);
        TensorTrain::from_cores(cores)
    }

    /// Contract the train into a dense tensor.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        self.reconstruct_with_budget(DENSE_BUDGET)
    }

    pub fn reconstruct_with_budget(&self, budget: usize) -> Result<DenseTensor> {
        let total: usize = self.mode_sizes().iter().product();
        if total > budget {
            return Err(Error::CapacityExceeded {
                needed: total,
                budget,
            });
        }
        // Carry (prefix x r), column-major.
        let mut carry: Vec<f64> = vec![1.0];
        let mut prefix = 1usize;
        let mut r_prev = 1usize;
        for core in &self.cores {
            let (_, j, q) = core.dim();
            if prefix * j * q > budget {
                return Err(Error::CapacityExceeded {
                    needed: prefix * j * q,
                    budget,
                });
            }
            let w = mat_from_colmajor(prefix, r_prev, carry);
            let prod = w.dot(&right_unfold(core)); // (prefix, j*q)
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
        DenseTensor::new(self.shape(), carry)
    }

    /// QR-sweep making cores `from..=to` left-orthonormal (R factors pushed
    /// right). The represented tensor is unchanged.
    pub fn left_orthonormalize_range(&mut self, from: usize, to: usize) -> Result<()> {
        if to + 1 >= self.cores.len() {
            return Err(Error::ModeOutOfRange {
                mode: to + 1,
                order: self.cores.len(),
            });
        }
        for n in from..=to {
            let (r, j, _) = self.cores[n].dim();
            let (q_mat, r_mat) = linalg::qr_econ(&left_unfold(&self.cores[n]))?;
            let new_rank = q_mat.ncols();
            self.cores[n] = fold_left(&q_mat.view(), r, j, new_rank);
            self.cores[n + 1] = contract_first(&r_mat.view(), &self.cores[n + 1]);
        }
        Ok(())
    }

    /// Make all cores up to the last one left-orthonormal.
    pub fn left_orthonormalize(&mut self) -> Result<()> {
        if self.cores.len() > 1 {
            self.left_orthonormalize_range(0, self.cores.len() - 2)?;
        }
        Ok(())
    }

    /// LQ-sweep making cores `from..=down_to` right-orthonormal (L factors
    /// pushed left), sweeping from the last core down.
    pub fn right_orthonormalize_downto(&mut self, down_to: usize) -> Result<()> {
        if down_to == 0 {
            return Err(Error::InvalidConfig(
                "core 0 cannot be right-orthonormalized in place".into(),
            ));
        }
        for n in (down_to..self.cores.len()).rev() {
            let (_, j, q) = self.cores[n].dim();
            let (l_mat, q_mat) = linalg::lq_econ(&right_unfold(&self.cores[n]))?;
            let new_rank = q_mat.nrows();
            self.cores[n] = fold_right(&q_mat.view(), new_rank, j, q);
            self.cores[n - 1] = contract_last(&self.cores[n - 1], &l_mat.view());
        }
        Ok(())
    }

    pub fn right_orthonormalize(&mut self) -> Result<()> {
        if self.cores.len() > 1 {
            self.right_orthonormalize_downto(1)?;
        }
        Ok(())
    }

    /// Frobenius norm, computed from an orthogonalized copy.
    pub fn norm(&self) -> Result<f64> {
        let mut t = self.clone();
        t.right_orthonormalize()?;
        Ok(t.cores[0].iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Inner product of two trains over the same shape.
    pub fn dot(&self, other: &TensorTrain) -> Result<f64> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::ShapeMismatch(
                "inner product of trains over different shapes".into(),
            ));
        }
        let mut v = Array2::<f64>::ones((1, 1));
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (_, j, qa) = a.dim();
            let qb = b.dim().2;
            let mut next = Array2::<f64>::zeros((qa, qb));
            for cj in 0..j {
                let a_j = a.index_axis(Axis(1), cj); // (ra, qa)
                let b_j = b.index_axis(Axis(1), cj); // (rb, qb)
                let t = a_j.t().dot(&v); // (qa, rb)
                next = next + t.dot(&b_j);
            }
            v = next;
        }
        Ok(v[[0, 0]])
    }

    pub fn scale(&mut self, alpha: f64) {
        self.cores[0].mapv_inplace(|v| v * alpha);
    }

    /// Rank truncation at relative accuracy `tol`: right-orthogonalize, then
    /// sweep truncated SVDs left to right with per-junction budget
    /// tol * |X| / sqrt(d - 1).
    pub fn round(&mut self, tol: f64, max_rank: Option<usize>) -> Result<()> {
        let d = self.cores.len();
        if d == 1 {
            return Ok(());
        }
        self.right_orthonormalize()?;
        let norm = self.cores[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            for n in 0..d {
                let (_, j, _) = self.cores[n].dim();
                self.cores[n] = Array3::zeros((1, j, 1));
            }
            return Ok(());
        }
        let delta = tol * norm / ((d - 1) as f64).sqrt();
        for n in 0..d - 1 {
            let (r, j, _) = self.cores[n].dim();
            let (u, s, vt) = linalg::svd_econ(&left_unfold(&self.cores[n]))?;
            let keep = linalg::retained_count_frobenius(&s, delta, max_rank);
            self.cores[n] = fold_left(&u.slice(s![.., ..keep]), r, j, keep);
            let mut carry = vt.slice(s![..keep, ..]).to_owned();
            for (k, &sv) in s.iter().take(keep).enumerate() {
                carry.row_mut(k).mapv_inplace(|v| v * sv);
            }
            self.cores[n + 1] = contract_first(&carry.view(), &self.cores[n + 1]);
        }
        Ok(())
    }

    /// Train with iid standard normal cores at the given interior ranks.
    pub fn random(shape: &Shape, interior_ranks: &[usize], seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let d = shape.order();
        if interior_ranks.len() + 1 != d {
            return Err(Error::InvalidConfig(format!(
                "{} interior ranks for a train of {} cores",
                interior_ranks.len(),
                d
            )));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cores = Vec::with_capacity(d);
        for n in 0..d {
            let r = if n == 0 { 1 } else { interior_ranks[n - 1] };
            let q = if n == d - 1 { 1 } else { interior_ranks[n] };
            cores.push(Array3::from_shape_fn((r, shape.size(n), q), |_| {
                rng.gen_range(-1.0..1.0)
            }));
        }
        TensorTrain::from_cores(cores)
    }
}

impl PairedTensorTrain {
    pub fn from_cores(cores: Vec<Array4<f64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidShape("train with no cores".into()));
        }
        if cores[0].dim().0 != 1 || cores.last().unwrap().dim().3 != 1 {
            return Err(Error::InvalidShape("boundary ranks must be 1".into()));
        }
        for w in cores.windows(2) {
            if w[0].dim().3 != w[1].dim().0 {
                return Err(Error::InvalidShape(format!(
                    "rank mismatch between cores: {} vs {}",
                    w[0].dim().3,
                    w[1].dim().0
                )));
            }
        }
        Ok(PairedTensorTrain { cores })
    }

    pub fn cores(&self) -> &[Array4<f64>] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn row_shape(&self) -> Shape {
        Shape::new(self.cores.iter().map(|c| c.dim().1).collect::<Vec<_>>()).expect("nonempty")
    }

    pub fn col_shape(&self) -> Shape {
        Shape::new(self.cores.iter().map(|c| c.dim().2).collect::<Vec<_>>()).expect("nonempty")
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = vec![1];
        r.extend(self.cores.iter().map(|c| c.dim().3));
        r
    }

    pub fn entry_count(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    /// View with each (row, column) mode pair fused into one mode of size
    /// J_n * I_n (row digit fastest). The fused train shares the flat layout
    /// of the interleaved paired tensor.
    pub fn to_fused(&self) -> TensorTrain {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let (r, j, i, q) = c.dim();
                let mut f = Array3::zeros((r, j * i, q));
                for cq in 0..q {
                    for ci in 0..i {
                        for cj in 0..j {
                            for cr in 0..r {
                                f[[cr, cj + j * ci, cq]] = c[[cr, cj, ci, cq]];
                            }
                        }
                    }
                }
                f
            })
            .collect();
        TensorTrain::from_cores(cores).expect("valid cores stay valid")
    }

    pub fn from_fused(tt: &TensorTrain, row_shape: &Shape, col_shape: &Shape) -> Result<Self> {
        if tt.order() != row_shape.order() || row_shape.order() != col_shape.order() {
            return Err(Error::ShapeMismatch(
                "fused train order does not match pair shapes".into(),
            ));
        }
        let mut cores = Vec::with_capacity(tt.order());
        for (n, c) in tt.cores().iter().enumerate() {
            let (r, f, q) = c.dim();
            let (j, i) = (row_shape.size(n), col_shape.size(n));
            if f != j * i {
                return Err(Error::ShapeMismatch(format!(
                    "fused mode {} does not split into {}x{}",
                    f, j, i
                )));
            }
            let mut core = Array4::zeros((r, j, i, q));
            for cq in 0..q {
                for ci in 0..i {
                    for cj in 0..j {
                        for cr in 0..r {
                            core[[cr, cj, ci, cq]] = c[[cr, cj + j * ci, cq]];
                        }
                    }
                }
            }
            cores.push(core);
        }
        PairedTensorTrain::from_cores(cores)
    }

    /// Sequential-SVD decomposition of a dense paired tensor with the mode
    /// pairs fused.
    pub fn decompose(x: &PairedTensor, tol: f64, max_rank: Option<usize>) -> Result<Self> {
        let fused_shape = x.row_shape().mode_product(x.col_shape())?;
        let fused = DenseTensor::new(fused_shape, x.data().to_vec())?;
        let tt = TensorTrain::decompose(&fused, tol, max_rank)?;
        PairedTensorTrain::from_fused(&tt, x.row_shape(), x.col_shape())
    }

    pub fn reconstruct(&self) -> Result<PairedTensor> {
        self.reconstruct_with_budget(DENSE_BUDGET)
    }

    pub fn reconstruct_with_budget(&self, budget: usize) -> Result<PairedTensor> {
        let dense = self.to_fused().reconstruct_with_budget(budget)?;
        PairedTensor::new(self.row_shape(), self.col_shape(), dense.into_data())
    }

    pub fn norm(&self) -> Result<f64> {
        self.to_fused().norm()
    }

    pub fn dot(&self, other: &PairedTensorTrain) -> Result<f64> {
        self.to_fused().dot(&other.to_fused())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.cores[0].mapv_inplace(|v| v * alpha);
    }

    pub fn round(&mut self, tol: f64, max_rank: Option<usize>) -> Result<()> {
        let row = self.row_shape();
        let col = self.col_shape();
        let mut fused = self.to_fused();
        fused.round(tol, max_rank)?;
        *self = PairedTensorTrain::from_fused(&fused, &row, &col)?;
        Ok(())
    }

    pub fn random(
        row_shape: &Shape,
        col_shape: &Shape,
        interior_ranks: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let fused_shape = row_shape.mode_product(col_shape)?;
        let tt = TensorTrain::random(&fused_shape, interior_ranks, seed)?;
        PairedTensorTrain::from_fused(&tt, row_shape, col_shape)
    }
}

#[cfg(test)]
mod tests;
