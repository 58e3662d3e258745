//! Statistical-query laboratory.
//!
//! Finite-domain distributions and queries, simulated SQ oracles, exact
//! statistical dimensions and discrimination norms for small instances, the
//! multiplicative-weights solver family, canonical problem generators, and a
//! bit-accounted streaming solver.

pub mod dimension;
pub mod distributions;
pub mod error;
pub mod games;
pub mod norms;
pub mod oracles;
pub mod problems;
pub mod report;
pub mod solvers;
pub mod streaming;

pub use error::{Result, SqError};
