//! Point-cloud to boundary-representation reconstruction: primitive fitting,
//! surface intersection, B-rep assembly, a differentiable Gaussian splat
//! renderer, evaluation metrics and file I/O.

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bezier;
pub mod chart;
pub mod cloud;
pub mod error;
pub mod fitting;
pub mod intersection;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod region;
pub mod splat;
pub(crate) mod spatial;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
