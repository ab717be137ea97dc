//! Dense tensors, differentiable kernels, the recording tape, and the
//! finite-difference gradient checker.

mod gradcheck;
pub mod ops;
mod param;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{finite_difference_check, CheckOptions, CheckReport, ParamCheck, MAX_PROBES_PER_PARAM};
pub use ops::Unary;
pub use param::{ParamId, ParamStore, Parameter};
pub use rng::Rng;
pub use tape::{Fault, Gradients, Tape, Var};
pub use tensor::Tensor;
