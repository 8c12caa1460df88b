//! Multilayer perceptrons for symbolic data.
//!
//! Symbolic values (intervals, category sets, distributions) are recoded into
//! numeric columns, networks are trained with output blocks whose activation
//! and loss match each target's type, and first-layer weight decay is
//! normalized by category count.

// `!(x >= 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod imputation;
pub mod mlp;
pub mod objective;
pub mod optim;
pub mod pipeline;
pub mod recoding;
pub mod selection;
pub mod symbolic;
pub mod training;

pub use error::{Error, Result};
