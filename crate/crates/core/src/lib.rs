//! Metric approximation of set-valued functions of bounded variation by
//! positive integral operators.
//!
//! Compact sets are finite point sets in `R^d`; every set operation on them is
//! exact. Set-valued functions are sampled oracles on a compact interval and
//! are approximated through their metric selections.

pub mod acceptance;
pub mod analysis;
pub mod error;
pub mod integral;
pub mod operators;
pub mod sets;
pub mod selections;
pub mod svf;

pub use error::{Error, Result};
pub use sets::{CompactSet, Norm, Point};
pub use svf::{Interval, IntervalFunction, Partition, RealFunction, SetValuedFunction, Step};

/// Fixed float formatting for exported tables: 17 significant digits, so
/// every `f64` round-trips and identical runs produce identical bytes.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}
