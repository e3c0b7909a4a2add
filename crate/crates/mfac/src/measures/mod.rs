//! Population-distribution estimation and the state×action bin partition.

mod bins;
mod empirical;

pub use bins::{BinPartition, Cell};
pub use empirical::EmpiricalMeasure;
