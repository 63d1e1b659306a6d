//! Dense matrices, a sparse CSR type and a small reverse-mode autodiff tape.

mod matrix;
pub mod ops;
mod sparse;
mod tape;

pub use matrix::Matrix;
pub use ops::{dropout, relu, softmax_rows, LOG_EPS};
pub use sparse::CsrMatrix;
pub use tape::{Gradients, OpKind, Tape, Var};
