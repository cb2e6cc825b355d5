//! Minimal reverse-mode differentiation: the handful of array ops an
//! encoder-decoder segmentation module needs, Adam, and a finite-difference
//! checker.

mod array;
mod gradcheck;
pub(crate) mod kernels;
mod optim;
mod tape;

pub use array::NdArray;
pub use gradcheck::{
    analytic_gradients, compare_gradients, grad_check, relative_error, GradCheckReport, Objective,
    RELATIVE_ERROR_FLOOR,
};
pub use kernels::Padding;
pub use optim::{Adam, Parameter};
pub use tape::{Gradients, Tape, Var};
