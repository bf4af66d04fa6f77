// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod certify;
pub mod energy;
pub mod error;
pub mod geodesic;
pub mod grid;
pub mod homotopy;
pub mod metric;
pub mod solver;
pub mod scenario;
pub mod target;

pub use error::{Error, Result};
