//! Linear and kernelized bias subspaces for word embeddings.
//!
//! A bias subspace is estimated from defining pairs (e.g. `he`/`she`). The
//! linear model projects it out of each vector. The kernel model works in an
//! RKHS: it corrects inner products there, and can emit debiased vectors
//! through a learned pre-image map. The [`evaluation`] module measures what
//! bias remains.

pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod kernel_debias;
pub mod kernels;
pub mod linear_debias;
pub mod model;
pub mod numerics;
pub mod preimage;
pub mod rng;
pub mod toy;

pub use embeddings::{parse_embedding_text, subset, unit_normalize, write_embedding_text, EmbeddingTable};
pub use error::{Error, ErrorKind, Result};
pub use kernel_debias::{
    build_centered_gram, fit_kernel_model, fit_kernel_model_on_pairs, CorrectedMetric, KernelBiasModel,
    KernelFitOptions, PairMatrix,
};
pub use kernels::{eval_kernel, gram_matrix, KernelSpec};
pub use linear_debias::{
    bias_covariance, build_design_matrix, equalize_table, fit_linear_subspace, neutralize_table, neutralize_vector,
    DefiningSets, EqualitySets, LinearBiasModel, SetsFile,
};
pub use model::BiasModel;
pub use preimage::{fit_preimage_map, preimage_neutralize, preimage_neutralize_table, PreimageMap, PreimageOptions};
