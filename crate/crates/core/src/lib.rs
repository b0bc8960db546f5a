// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod error;
pub mod grid;
pub mod history;
pub mod linalg;
pub mod lyapunov;
pub mod predictor;
pub mod simulator;
pub mod trajectory;

pub use error::{Error, Result};
