//! Even-order paired tensors. A paired tensor carries N row modes
//! (sizes J_1..J_N) and N column modes (sizes I_1..I_N); entries are stored
//! with the digits interleaved as (j_1, i_1, j_2, i_2, ...), column-major.
//!
//! The unfolding `psi` maps a paired tensor to the |J| x |I| matrix with
//! row index j_1 + J_1 (j_2 - 1) + ... and column index built the same way
//! from the column digits (1-based form). It is a bijection that carries
//! the Einstein product to the ordinary matrix product.

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{self, mat_from_colmajor};
use crate::shape::{Factorization, Shape};
use ndarray::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedTensor {
    row_shape: Shape,
    col_shape: Shape,
    data: Vec<f64>,
}

impl PairedTensor {
    pub fn new(row_shape: Shape, col_shape: Shape, data: Vec<f64>) -> Result<Self> {
        if row_shape.order() != col_shape.order() {
            return Err(Error::ShapeMismatch(format!(
                "row shape {} and column shape {} have different orders",
                row_shape, col_shape
            )));
        }
        let total = row_shape.total() * col_shape.total();
        if data.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {} x {} entries",
                data.len(),
                row_shape,
                col_shape
            )));
        }
        Ok(PairedTensor {
            row_shape,
            col_shape,
            data,
        })
    }

    pub fn zeros(row_shape: Shape, col_shape: Shape) -> Result<Self> {
        let total = row_shape.total() * col_shape.total();
        PairedTensor::new(row_shape, col_shape, vec![0.0; total])
    }

    pub fn from_fn(
        row_shape: Shape,
        col_shape: Shape,
        mut f: impl FnMut(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let mut t = PairedTensor::zeros(row_shape, col_shape)?;
        let roff = t.row_offsets();
        let coff = t.col_offsets();
        for (clin, off_c) in coff.iter().enumerate() {
            let ci = t.col_shape.delinearize(clin);
            for (rlin, off_r) in roff.iter().enumerate() {
                let ri = t.row_shape.delinearize(rlin);
                t.data[off_r + off_c] = f(&ri, &ci);
            }
        }
        Ok(t)
    }

    /// Identity for the Einstein product on the given square shape.
    pub fn identity(shape: &Shape) -> Self {
        PairedTensor::from_fn(shape.clone(), shape.clone(), |j, i| {
            if j == i {
                1.0
            } else {
                0.0
            }
        })
        .expect("identical shapes")
    }

    pub fn order(&self) -> usize {
        self.row_shape.order()
    }

    pub fn row_shape(&self) -> &Shape {
        &self.row_shape
    }

    pub fn col_shape(&self) -> &Shape {
        &self.col_shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Shape of the underlying storage: interleaved (J_1, I_1, J_2, I_2, ...).
    pub fn interleaved_shape(&self) -> Shape {
        let mut sizes = Vec::with_capacity(2 * self.order());
        for n in 0..self.order() {
            sizes.push(self.row_shape.size(n));
            sizes.push(self.col_shape.size(n));
        }
        Shape::new(sizes).expect("nonempty")
    }

    /// View the interleaved storage as a plain dense tensor.
    pub fn as_dense(&self) -> DenseTensor {
        DenseTensor::new(self.interleaved_shape(), self.data.clone()).expect("sizes agree")
    }

    /// Flat storage offsets contributed by each linearized row index.
    /// The offset of entry (j, i) is `row_offsets[j_lin] + col_offsets[i_lin]`.
    pub fn row_offsets(&self) -> Vec<usize> {
        Self::digit_offsets(self.row_shape.sizes(), self.col_shape.sizes(), true)
    }

    /// Flat storage offsets contributed by each linearized column index.
    pub fn col_offsets(&self) -> Vec<usize> {
        Self::digit_offsets(self.row_shape.sizes(), self.col_shape.sizes(), false)
    }

    fn digit_offsets(rows: &[usize], cols: &[usize], for_rows: bool) -> Vec<usize> {
        let (own, other) = if for_rows { (rows, cols) } else { (cols, rows) };
        let mut offsets = vec![0usize];
        let mut pair_stride = 1usize;
        for n in 0..own.len() {
            // Within pair n the row digit comes first.
            let stride = if for_rows {
                pair_stride
            } else {
                pair_stride * rows[n]
            };
            let mut next = Vec::with_capacity(offsets.len() * own[n]);
            for d in 0..own[n] {
                let add = d * stride;
                next.extend(offsets.iter().map(|&o| o + add));
            }
            offsets = next;
            pair_stride *= own[n] * other[n];
        }
        offsets
    }

    pub fn get(&self, row: &[usize], col: &[usize]) -> f64 {
        let mut off = 0;
        let mut pair_stride = 1;
        for n in 0..self.order() {
            off += row[n] * pair_stride;
            off += col[n] * pair_stride * self.row_shape.size(n);
            pair_stride *= self.row_shape.size(n) * self.col_shape.size(n);
        }
        self.data[off]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn add(&self, other: &PairedTensor) -> Result<PairedTensor> {
        if self.row_shape != other.row_shape || self.col_shape != other.col_shape {
            return Err(Error::ShapeMismatch(format!(
                "sum of {}x{} with {}x{}",
                self.row_shape, self.col_shape, other.row_shape, other.col_shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        PairedTensor::new(self.row_shape.clone(), self.col_shape.clone(), data)
    }

    /// The unfolding matrix `psi(A)` of size |rows| x |cols|.
    pub fn psi_unfold(&self) -> Array2<f64> {
        let roff = self.row_offsets();
        let coff = self.col_offsets();
        let mut out = Vec::with_capacity(self.data.len());
        for &oc in &coff {
            for &or in &roff {
                out.push(self.data[or + oc]);
            }
        }
        mat_from_colmajor(roff.len(), coff.len(), out)
    }

    /// Inverse of `psi_unfold`: arrange a matrix into a paired tensor with
    /// the given row and column shapes.
    pub fn psi_fold(m: &ArrayView2<f64>, row_shape: Shape, col_shape: Shape) -> Result<Self> {
        if row_shape.order() != col_shape.order() {
            return Err(Error::ShapeMismatch(format!(
                "row shape {} and column shape {} have different orders",
                row_shape, col_shape
            )));
        }
        if m.nrows() != row_shape.total() || m.ncols() != col_shape.total() {
            return Err(Error::ShapeMismatch(format!(
                "matrix {}x{} folded into {} x {}",
                m.nrows(),
                m.ncols(),
                row_shape,
                col_shape
            )));
        }
        let mut t = PairedTensor::zeros(row_shape, col_shape)?;
        let roff = t.row_offsets();
        let coff = t.col_offsets();
        for (c, &oc) in coff.iter().enumerate() {
            for (r, &or) in roff.iter().enumerate() {
                t.data[or + oc] = m[[r, c]];
            }
        }
        Ok(t)
    }

    /// Einstein product: contract this tensor's column modes with the row
    /// modes of `rhs`. The shared shape must match exactly.
    pub fn einstein_product(&self, rhs: &PairedTensor) -> Result<PairedTensor> {
        if self.col_shape != rhs.row_shape {
            return Err(Error::ShapeMismatch(format!(
                "einstein product contracts {} with {}",
                self.col_shape, rhs.row_shape
            )));
        }
        let mut y = PairedTensor::zeros(self.row_shape.clone(), rhs.col_shape.clone())?;
        let a_roff = self.row_offsets();
        let a_coff = self.col_offsets();
        let b_roff = rhs.row_offsets();
        let b_coff = rhs.col_offsets();
        let y_roff = y.row_offsets();
        let y_coff = y.col_offsets();
        let nj = a_roff.len();
        for (c, &b_oc) in b_coff.iter().enumerate() {
            let y_oc = y_coff[c];
            for (k, &a_ok) in a_coff.iter().enumerate() {
                let bv = rhs.data[b_roff[k] + b_oc];
                if bv == 0.0 {
                    continue;
                }
                for r in 0..nj {
                    y.data[y_roff[r] + y_oc] += self.data[a_roff[r] + a_ok] * bv;
                }
            }
        }
        Ok(y)
    }

    /// Apply this tensor to a dense tensor shaped like the column modes.
    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        if x.shape() != &self.col_shape {
            return Err(Error::ShapeMismatch(format!(
                "operator with column shape {} applied to {}",
                self.col_shape,
                x.shape()
            )));
        }
        let roff = self.row_offsets();
        let coff = self.col_offsets();
        let mut out = DenseTensor::zeros(self.row_shape.clone());
        let y = out.data_mut();
        for (k, &ok) in coff.iter().enumerate() {
            let xv = x.data()[k];
            if xv == 0.0 {
                continue;
            }
            for (r, &or) in roff.iter().enumerate() {
                y[r] += self.data[or + ok] * xv;
            }
        }
        Ok(out)
    }

    /// U-transpose: swap the row and column mode groups.
    pub fn u_transpose(&self) -> PairedTensor {
        let mut t = PairedTensor::zeros(self.col_shape.clone(), self.row_shape.clone())
            .expect("orders match");
        let roff = self.row_offsets();
        let coff = self.col_offsets();
        let t_roff = t.row_offsets();
        let t_coff = t.col_offsets();
        for (c, &oc) in coff.iter().enumerate() {
            for (r, &or) in roff.iter().enumerate() {
                t.data[t_roff[c] + t_coff[r]] = self.data[or + oc];
            }
        }
        t
    }

    /// U-inverse via the unfolding. Requires |rows| == |cols| and a
    /// numerically nonsingular unfolding.
    pub fn u_inverse(&self) -> Result<PairedTensor> {
        if self.row_shape.total() != self.col_shape.total() {
            return Err(Error::ShapeMismatch(format!(
                "inverse of nonsquare unfolding {} x {}",
                self.row_shape, self.col_shape
            )));
        }
        let m = self.psi_unfold();
        let (u, s, vt) = linalg::svd_econ(&m)?;
        let smax = s[0];
        let smin = *s.last().unwrap();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond < 1e12) {
            return Err(Error::SingularUnfolding { cond });
        }
        // inv = V * diag(1/s) * U^T
        let mut vs = vt.t().to_owned();
        for (k, &sv) in s.iter().enumerate() {
            vs.column_mut(k).mapv_inplace(|v| v / sv);
        }
        let inv = vs.dot(&u.t());
        PairedTensor::psi_fold(&inv.view(), self.col_shape.clone(), self.row_shape.clone())
    }

    /// Eigenvalues of the (square) unfolding.
    pub fn u_eigenvalues(&self) -> Result<Vec<num_complex::Complex64>> {
        if self.row_shape.total() != self.col_shape.total() {
            return Err(Error::ShapeMismatch(format!(
                "eigenvalues of nonsquare unfolding {} x {}",
                self.row_shape, self.col_shape
            )));
        }
        linalg::eigenvalues(&self.psi_unfold())
    }

    /// Numerical rank of the unfolding at relative tolerance `tol`
    /// (machine floor when `tol` is zero).
    pub fn unfolding_rank(&self, tol: f64) -> Result<usize> {
        use ndarray_linalg::SVD;
        let m = self.psi_unfold();
        let (_, s, _) = m.svd(false, false)?;
        if s.is_empty() || s[0] <= 0.0 {
            return Ok(0);
        }
        let floor = f64::EPSILON * m.nrows().max(m.ncols()) as f64;
        let cut = s[0] * tol.max(floor);
        Ok(s.iter().take_while(|&&v| v > cut).count())
    }

    /// Mode row block tensor: arrange `blocks` (all of one shape) into a
    /// tensor whose column mode n has size counts[n] * I_n. Block k sits in
    /// the column slab with digits l_n in [k_n I_n, (k_n + 1) I_n), where
    /// (k_1, ..., k_N) is the column-major digit expansion of k over the
    /// factorization.
    pub fn block_row(blocks: &[PairedTensor], fact: &Factorization) -> Result<PairedTensor> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidConfig("block_row of no blocks".into()))?;
        fact.check_order(first.col_shape())?;
        if fact.total() != blocks.len() {
            return Err(Error::InvalidFactorization(format!(
                "{} blocks arranged by a factorization of {}",
                blocks.len(),
                fact.total()
            )));
        }
        for b in blocks {
            if b.row_shape != first.row_shape || b.col_shape != first.col_shape {
                return Err(Error::ShapeMismatch(
                    "blocks of a block tensor must share one shape".into(),
                ));
            }
        }
        let base = first.col_shape.clone();
        let blocked = base.mode_product(&fact.as_shape())?;
        let mut y = PairedTensor::zeros(first.row_shape.clone(), blocked)?;

        let y_roff = y.row_offsets();
        let y_coff = y.col_offsets();
        let b_roff = first.row_offsets();
        let b_coff = first.col_offsets();
        let fact_shape = fact.as_shape();
        for (k, block) in blocks.iter().enumerate() {
            let kd = fact_shape.delinearize(k);
            for (c, &b_oc) in b_coff.iter().enumerate() {
                let ci = base.delinearize(c);
                let l: Vec<usize> = ci
                    .iter()
                    .zip(&kd)
                    .zip(base.sizes())
                    .map(|((&i, &kn), &sz)| i + kn * sz)
                    .collect();
                let y_oc = y_coff[y.col_shape.linearize(&l)];
                for (r, &b_or) in b_roff.iter().enumerate() {
                    y.data[y_roff[r] + y_oc] = block.data[b_or + b_oc];
                }
            }
        }
        Ok(y)
    }

    /// Row block along a single column mode.
    pub fn block_row_n(blocks: &[PairedTensor], mode: usize) -> Result<PairedTensor> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidConfig("block_row_n of no blocks".into()))?;
        let order = first.col_shape().order();
        if mode >= order {
            return Err(Error::ModeOutOfRange { mode, order });
        }
        let mut counts = vec![1; order];
        counts[mode] = blocks.len();
        PairedTensor::block_row(blocks, &Factorization::new(counts)?)
    }

    /// Extract block `k` (column-major block index) from a mode row block
    /// tensor with the given factorization of the column modes.
    pub fn extract_block(&self, fact: &Factorization, k: usize) -> Result<PairedTensor> {
        let base = fact.base_of(&self.col_shape)?;
        if k >= fact.total() {
            return Err(Error::InvalidConfig(format!(
                "block index {} out of {}",
                k,
                fact.total()
            )));
        }
        let kd = fact.as_shape().delinearize(k);
        let mut out = PairedTensor::zeros(self.row_shape.clone(), base.clone())?;
        let o_roff = out.row_offsets();
        let o_coff = out.col_offsets();
        let roff = self.row_offsets();
        let coff = self.col_offsets();
        for (c, &o_oc) in o_coff.iter().enumerate() {
            let ci = base.delinearize(c);
            let l: Vec<usize> = ci
                .iter()
                .zip(&kd)
                .zip(base.sizes())
                .map(|((&i, &kn), &sz)| i + kn * sz)
                .collect();
            let oc = coff[self.col_shape.linearize(&l)];
            for (r, &o_or) in o_roff.iter().enumerate() {
                out.data[o_or + o_oc] = self.data[roff[r] + oc];
            }
        }
        Ok(out)
    }

    /// Mode column block tensor: the dual of `block_row`, stacking over the
    /// row modes.
    pub fn block_col(blocks: &[PairedTensor], fact: &Factorization) -> Result<PairedTensor> {
        let transposed: Vec<PairedTensor> = blocks.iter().map(|b| b.u_transpose()).collect();
        Ok(PairedTensor::block_row(&transposed, fact)?.u_transpose())
    }

    /// Extract block `k` from a mode column block tensor.
    pub fn extract_block_col(&self, fact: &Factorization, k: usize) -> Result<PairedTensor> {
        Ok(self.u_transpose().extract_block(fact, k)?.u_transpose())
    }

    /// Permutation taken by `psi` on the columns of a row block tensor:
    /// column `j` of the concatenation [psi(X_0) | psi(X_1) | ...] appears
    /// as column `perm[j]` of psi(block_row(blocks)).
    pub fn block_row_permutation(base_col: &Shape, fact: &Factorization) -> Result<Vec<usize>> {
        fact.check_order(base_col)?;
        let blocked = base_col.mode_product(&fact.as_shape())?;
        let fact_shape = fact.as_shape();
        let mut perm = Vec::with_capacity(blocked.total());
        for k in 0..fact.total() {
            let kd = fact_shape.delinearize(k);
            for c in 0..base_col.total() {
                let ci = base_col.delinearize(c);
                let l: Vec<usize> = ci
                    .iter()
                    .zip(&kd)
                    .zip(base_col.sizes())
                    .map(|((&i, &kn), &sz)| i + kn * sz)
                    .collect();
                perm.push(blocked.linearize(&l));
            }
        }
        Ok(perm)
    }
}
