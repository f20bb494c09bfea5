//! Typical information content of infinitely wide relu networks.
//!
//! A training set of `n` inputs with `±1` labels induces, through the
//! relu NNGP kernel, a Gaussian `N(0, Σ)` over network outputs. The prior
//! mass of networks that fit the labels is the Gaussian orthant probability
//! picked out by the labels; its negative logarithm is the information
//! content, which plugs into a realisable PAC-Bayes bound.
//!
//! * [`linalg`]: Cholesky factor, inverse, log-domain determinant root.
//! * [`kernel`]: the compositional arccosine kernel.
//! * [`orthant`]: Monte-Carlo `C₀`, closed-form `C₁`, rejection oracle.
//! * [`pac_bayes`]: error certificates and the symmetry-counting bound.
//! * [`data`]: MNIST IDX parsing and dataset variants.
//! * [`rng`]: counter-based random streams.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod orthant;
pub mod pac_bayes;
pub mod rng;

pub use data::{build_dataset, synthetic_dataset, Dataset, DatasetVariant, RawImageSet};
pub use error::{Error, Result};
pub use kernel::{arccos_step, kernel_matrix, normalize_inputs, ArchSpec, InputMatrix};
pub use linalg::{cholesky, CholeskyFactor, CovarianceMatrix, Matrix};
pub use orthant::{
    c1_bound, estimate_c0, info_upper_bound, orthant_oracle, sign_flip_canonicalize, InfoEstimate,
    KernelAnalysis, LabelVector,
};
pub use pac_bayes::{realisable_bound, symmetry_info_bound, GeneralisationBound};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
