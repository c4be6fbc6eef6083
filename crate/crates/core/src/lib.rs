//! Algebraic curvature tensors, curvature cones and the curvature ODE
//! `dR/dt = Q(R)`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone;
pub mod error;
pub mod flow;
pub mod functional;
pub mod io;
pub mod models;
pub mod rigidity;
pub mod rng;
pub mod search;
pub mod tensor;

pub use error::{CurvError, Result};
pub use tensor::CurvTensor;
