use crate::error::{Error, Result};
use std::fmt;

/// Ordered list of positive mode sizes. Linearization is always
/// column-major: the first mode varies fastest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    sizes: Vec<usize>,
}

impl Shape {
    pub fn new(sizes: impl Into<Vec<usize>>) -> Result<Self> {
        let sizes = sizes.into();
        if sizes.is_empty() {
            return Err(Error::InvalidShape("empty shape".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidShape(format!("zero mode size in {:?}", sizes)));
        }
        Ok(Shape { sizes })
    }

    /// Shape with `order` modes all equal to `size`.
    pub fn uniform(order: usize, size: usize) -> Result<Self> {
        Shape::new(vec![size; order])
    }

    pub fn order(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, mode: usize) -> usize {
        self.sizes[mode]
    }

    /// Total number of entries indexed by this shape.
    pub fn total(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Column-major strides: stride of mode n is the product of the sizes
    /// of all earlier modes.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = Vec::with_capacity(self.sizes.len());
        let mut acc = 1;
        for &s in &self.sizes {
            strides.push(acc);
            acc *= s;
        }
        strides
    }

    /// Column-major linear index of a multi-index (0-based).
    pub fn linearize(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.sizes.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &s) in index.iter().zip(&self.sizes) {
            debug_assert!(i < s);
            lin += i * stride;
            stride *= s;
        }
        lin
    }

    /// Column-major multi-index (0-based) of a linear index.
    pub fn delinearize(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.sizes.len());
        for &s in &self.sizes {
            idx.push(lin % s);
            lin /= s;
        }
        idx
    }

    /// Iterate over all multi-indices in column-major order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.total()).map(move |lin| self.delinearize(lin))
    }

    /// Per-mode product with another shape of the same order.
    pub fn mode_product(&self, other: &Shape) -> Result<Shape> {
        if self.order() != other.order() {
            return Err(Error::ShapeMismatch(format!(
                "cannot combine {} with {}",
                self, other
            )));
        }
        Shape::new(
            self.sizes
                .iter()
                .zip(other.sizes())
                .map(|(&a, &b)| a * b)
                .collect::<Vec<_>>(),
        )
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.sizes.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s)?;
        }
        write!(f, "}}")
    }
}

/// Per-mode block counts used when stacking tensors into block tensors.
/// Aligned with a base shape of the same order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    counts: Vec<usize>,
}

impl Factorization {
    pub fn new(counts: impl Into<Vec<usize>>) -> Result<Self> {
        let counts = counts.into();
        if counts.is_empty() {
            return Err(Error::InvalidFactorization("empty factorization".into()));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidFactorization(format!(
                "zero block count in {:?}",
                counts
            )));
        }
        Ok(Factorization { counts })
    }

    /// Factorization of `total` blocks stacked along the last of `order` modes.
    pub fn last_mode(order: usize, total: usize) -> Result<Self> {
        let mut counts = vec![1; order];
        if order == 0 {
            return Err(Error::InvalidFactorization("empty factorization".into()));
        }
        counts[order - 1] = total;
        Factorization::new(counts)
    }

    pub fn order(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, mode: usize) -> usize {
        self.counts[mode]
    }

    /// Total number of blocks.
    pub fn total(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn as_shape(&self) -> Shape {
        Shape::new(self.counts.clone()).expect("factorization entries are positive")
    }

    pub fn check_order(&self, base: &Shape) -> Result<()> {
        if self.order() != base.order() {
            return Err(Error::InvalidFactorization(format!(
                "factorization {:?} does not align with base shape {}",
                self.counts, base
            )));
        }
        Ok(())
    }

    /// Per-mode division of a blocked shape back into its base shape.
    pub fn base_of(&self, blocked: &Shape) -> Result<Shape> {
        self.check_order(blocked)?;
        let mut base = Vec::with_capacity(self.order());
        for (&c, &s) in self.counts.iter().zip(blocked.sizes()) {
            if s % c != 0 {
                return Err(Error::InvalidFactorization(format!(
                    "block count {} does not divide mode size {}",
                    c, s
                )));
            }
            base.push(s / c);
        }
        Shape::new(base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_zero() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![2, 0]).is_err());
        assert!(Factorization::new(vec![]).is_err());
        assert!(Factorization::new(vec![1, 0]).is_err());
    }

    #[test]
    fn column_major_linearization() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.total(), 24);
        assert_eq!(s.strides(), vec![1, 2, 6]);
        // first mode fastest
        assert_eq!(s.linearize(&[1, 0, 0]), 1);
        assert_eq!(s.linearize(&[0, 1, 0]), 2);
        assert_eq!(s.linearize(&[0, 0, 1]), 6);
        assert_eq!(s.linearize(&[1, 2, 3]), 1 + 2 * 2 + 3 * 6);
        for lin in 0..s.total() {
            assert_eq!(s.linearize(&s.delinearize(lin)), lin);
        }
    }

    #[test]
    fn factorization_base() {
        let f = Factorization::new(vec![2, 1, 3]).unwrap();
        let blocked = Shape::new(vec![4, 5, 6]).unwrap();
        let base = f.base_of(&blocked).unwrap();
        assert_eq!(base.sizes(), &[2, 5, 2]);
        assert_eq!(f.total(), 6);
        assert!(f.base_of(&Shape::new(vec![3, 5, 6]).unwrap()).is_err());
    }

    #[test]
    fn last_mode_factorization() {
        let f = Factorization::last_mode(3, 7).unwrap();
        assert_eq!(f.counts(), &[1, 1, 7]);
    }
}
