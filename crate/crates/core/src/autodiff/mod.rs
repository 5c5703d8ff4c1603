//! Reverse-mode automatic differentiation, initializers and the Adam optimizer.

mod init;
mod optim;
mod params;
mod tape;
mod tensor;

pub use init::{xavier_init, zeros_init, XavierVariant};
pub use optim::{AdamConfig, AdamState};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tape::{Binary, Tape, Unary, Var};
pub use tensor::Tensor;

pub(crate) use tape::{log_sum_exp, sigmoid};
