//! Dense/sparse matrices, reverse-mode gradients and optimizers.

mod gradcheck;
pub mod io;
mod matrix;
mod optim;
mod sparse;
mod tape;

pub use gradcheck::{analytic_gradient, finite_difference, grad_check, relative_error, GRAD_CHECK_FLOOR};
pub use matrix::Matrix;
pub use optim::{
    adagrad_update, Optimizer, OptimizerKind, Parameter, ADAGRAD_EPS, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPS,
};
pub use sparse::CsrMatrix;
pub use tape::{softmax_rows, Tape, Var};
