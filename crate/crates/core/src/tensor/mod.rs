//! Dense matrices and a small reverse-mode autodiff tape.

mod matrix;
mod tape;

pub use matrix::{Axis, Matrix};
pub use tape::{Gradients, Op, Tape, Var};
