#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gridfn;
pub mod linalg;
pub mod diffop;
pub(crate) mod ode;
pub mod schrod;
pub mod crum;
pub mod susy;
pub mod cubic;
pub mod cli;

pub use error::{Error, Result};
