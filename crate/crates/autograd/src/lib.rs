//! A small `f32` tensor library with reverse-mode automatic differentiation.
//!
//! Gradients are graph values, so differentiating a gradient (as a gradient
//! norm penalty requires) works the same way as a first derivative.

pub mod conv;
mod error;
pub mod optim;
pub mod tensor;
pub mod var;

pub use conv::ConvGeom;
pub use error::{AutogradError, Result};
pub use optim::Adam;
pub use tensor::Tensor;
pub use var::{grad, no_grad, NoGradGuard, Var};
