//! Dense matrices, reverse-mode differentiation and the Adam optimizer.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, primitive_suite, relative_error, GradCheckReport, PrimitiveCheck, PRIMITIVES};
pub(crate) use tape::{cosine_similarity, scatter_neighbors};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
