//! Tensor-train linear algebra for multilinear time-invariant systems.
//!
//! The crate covers the full pipeline from dense even-order paired tensors
//! (with the matrix-unfolding isomorphism and the Einstein product) through
//! tensor-train compression, a tensor SVD, tensor Stein/Lyapunov solvers,
//! and balanced-truncation-style model order reduction, together with
//! matrix-level baselines used to cross-check every compressed path.

use blas_src as _;

pub mod dense;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod paired;
pub mod reduction;
pub mod shape;
pub mod systems;
pub mod train;

pub use dense::DenseTensor;
pub use error::{Error, Result};
pub use paired::PairedTensor;
pub use shape::{Factorization, Shape};
pub use train::{PairedTensorTrain, TensorTrain};
