//! Evolutionary product-unit neural networks for classification, with
//! master/worker distribution of configuration grids and independent runs.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// the weight draw must follow its coin flip on the same stream
#![allow(clippy::filter_map_bool_then)]

pub mod cluster;
pub mod data;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod network;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
