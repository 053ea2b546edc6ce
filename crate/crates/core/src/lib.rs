// Negated float comparisons throughout reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod kronalg;
pub mod levy;
pub mod moments;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
