use crate::error::{Error, Result};
use crate::shape::Shape;
use ndarray::linalg::general_mat_mul;
use ndarray::prelude::*;

/// Dense tensor stored column-major (first mode fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.total() {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape {} with {} entries",
                data.len(),
                shape,
                shape.total()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.total();
        DenseTensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let data = (0..shape.total())
            .map(|lin| f(&shape.delinearize(lin)))
            .collect();
        DenseTensor { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.linearize(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let lin = self.shape.linearize(index);
        self.data[lin] = value;
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// Sum of entrywise products. Shapes must match exactly.
    pub fn inner_product(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "inner product of {} with {}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise sum. Shapes must match exactly.
    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "sum of {} with {}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Contract mode `mode` with the matrix `m` of shape (new_size, old_size):
    /// the result has entry sum_j m[a, j] x[.., j, ..].
    pub fn mode_n_product(&self, m: &ArrayView2<f64>, mode: usize) -> Result<DenseTensor> {
        let order = self.shape.order();
        if mode >= order {
            return Err(Error::ModeOutOfRange { mode, order });
        }
        let jn = self.shape.size(mode);
        if m.ncols() != jn {
            return Err(Error::ShapeMismatch(format!(
                "matrix with {} columns applied to mode of size {}",
                m.ncols(),
                jn
            )));
        }
        let new_n = m.nrows();
        let left: usize = self.shape.sizes()[..mode].iter().product();
        let right: usize = self.shape.sizes()[mode + 1..].iter().product();

        let mut new_sizes = self.shape.sizes().to_vec();
        new_sizes[mode] = new_n;
        let new_shape = Shape::new(new_sizes)?;
        let mut out = vec![0.0; new_shape.total()];

        let mt = m.t();
        for r in 0..right {
            let src = ArrayView2::from_shape(
                (left, jn).f(),
                &self.data[r * left * jn..(r + 1) * left * jn],
            )
            .expect("contiguous column-major slab");
            let mut dst = ArrayViewMut2::from_shape(
                (left, new_n).f(),
                &mut out[r * left * new_n..(r + 1) * left * new_n],
            )
            .expect("contiguous column-major slab");
            general_mat_mul(1.0, &src, &mt, 0.0, &mut dst);
        }
        DenseTensor::new(new_shape, out)
    }

    /// Apply mode products on distinct modes. The modes must be pairwise
    /// distinct; the result does not depend on the order of application.
    pub fn tucker_product(&self, factors: &[(usize, ArrayView2<f64>)]) -> Result<DenseTensor> {
        let mut seen = vec![false; self.shape.order()];
        for &(mode, _) in factors {
            if mode >= self.shape.order() {
                return Err(Error::ModeOutOfRange {
                    mode,
                    order: self.shape.order(),
                });
            }
            if seen[mode] {
                return Err(Error::InvalidConfig(format!(
                    "repeated mode {} in tucker product",
                    mode
                )));
            }
            seen[mode] = true;
        }
        let mut acc = self.clone();
        for &(mode, ref m) in factors {
            acc = acc.mode_n_product(m, mode)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t234() -> DenseTensor {
        let shape = Shape::new(vec![2, 3, 4]).unwrap();
        DenseTensor::from_fn(shape, |idx| {
            (1 + idx[0]) as f64 + 10.0 * idx[1] as f64 + 100.0 * idx[2] as f64
        })
    }

    #[test]
    fn mode_product_matches_naive_sum() {
        let x = t234();
        let m = ndarray::array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]];
        let y = x.mode_n_product(&m.view(), 1).unwrap();
        assert_eq!(y.shape().sizes(), &[2, 2, 4]);
        for i in 0..2 {
            for a in 0..2 {
                for k in 0..4 {
                    let mut want = 0.0;
                    for j in 0..3 {
                        want += m[[a, j]] * x.get(&[i, j, k]);
                    }
                    assert_abs_diff_eq!(y.get(&[i, a, k]), want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn tucker_is_order_insensitive() {
        let x = t234();
        let m0 = ndarray::array![[1.0, -2.0], [0.0, 1.5], [2.0, 2.0]];
        let m2 = ndarray::array![[0.5, 1.0, 0.0, -1.0], [1.0, 0.0, 2.0, 0.0]];
        let a = x
            .tucker_product(&[(0, m0.view()), (2, m2.view())])
            .unwrap();
        let b = x
            .tucker_product(&[(2, m2.view()), (0, m0.view())])
            .unwrap();
        assert_eq!(a.shape(), b.shape());
        for (u, v) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
        assert!(x
            .tucker_product(&[(0, m0.view()), (0, m0.view())])
            .is_err());
    }

    #[test]
    fn inner_product_and_norm() {
        let x = t234();
        let n2 = x.inner_product(&x).unwrap();
        assert_abs_diff_eq!(n2.sqrt(), x.frobenius_norm(), epsilon = 1e-12);
        let y = DenseTensor::zeros(x.shape().clone());
        assert_abs_diff_eq!(x.inner_product(&y).unwrap(), 0.0);
        let z = DenseTensor::zeros(Shape::new(vec![2, 3]).unwrap());
        assert!(x.inner_product(&z).is_err());
    }
}
