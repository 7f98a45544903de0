//! Construction and numerical verification of projectively equivalent
//! Riemannian metric pairs.

pub mod charts;
pub mod constructions;
pub mod dense;
pub mod error;
pub mod normal_forms;
pub mod poly;
pub mod projective;
pub mod scalar;
pub mod split_glue;
pub mod verify;

pub use charts::{Chart, MetricField, MetricPair, PhasePoint};
pub use error::{GeqError, Result};
pub use poly::ScalarFunction1D;
pub use scalar::{Dual, Scalar};
