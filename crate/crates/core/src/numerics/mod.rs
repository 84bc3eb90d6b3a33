//! Dense tensors, a reverse-mode tape, finite-difference checking and AdamW.

pub mod gradcheck;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use gradcheck::{finite_difference_gradient, finite_difference_scalar, max_relative_error};
pub use optim::AdamW;
pub use params::{Bound, Gradients, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
