//! Tensor-subspace unsupervised domain adaptation.
//!
//! Samples are K-mode dense tensors stacked along a trailing sample mode.
//! The crate learns a shared Tucker subspace for a source and a target
//! domain (NTSL) and, optionally, a set of per-mode orthogonal alignment
//! matrices that rotate source samples toward the target domain (TAISL).
//! Evaluation helpers cover ridge classifiers and A-distance diagnostics.
//!
//! All mode indices in the public API are zero-based.

pub mod adapt;
pub mod data_io;
mod error;
pub mod eval;
pub mod linalg;
pub mod method;
pub mod stiefel;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, Matrix, Shape};
