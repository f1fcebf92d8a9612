//! Dense tensors with a recording tape for reverse-mode gradients.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, relative_error, ParamCheck};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{Elementwise, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
