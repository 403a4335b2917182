// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cayley;
pub mod cli;
pub mod error;
pub mod fingerprint;
pub mod freiman;
pub mod gap;
pub mod harness;
pub mod logmath;
mod rank;
pub mod zn;

pub use error::{Error, Result};
