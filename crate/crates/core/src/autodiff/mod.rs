//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records each operator as it executes; [`Tape::backward`] walks
//! the record in reverse and accumulates gradients into leaves. Parameters are
//! recorded with [`Tape::param`] under a caller-chosen key so an external
//! store can collect their gradients afterwards.

mod conv;
pub mod gemm;
mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, InputCheck, REL_ERR_FLOOR};
pub use tape::{BatchNormOptions, Mode, RunningStats, Tape, Var};
pub use tensor::{Shape, Tensor};

#[cfg(test)]
mod tests;
