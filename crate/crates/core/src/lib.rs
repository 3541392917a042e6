//! Sequential surrogate modelling for estimating the full distribution (CDF and
//! CCDF, tails included) of a scalar black-box simulator output.
//!
//! The crate is organised around the sequential loop in [`runner`]:
//!
//! 1. draw a Monte Carlo candidate pool from the input [`distributions::JointModel`];
//! 2. pick an initial design with the pool-based maximin design in [`designs`];
//! 3. fit a surrogate ([`surrogates`]: GP, PCE or PC-Kriging);
//! 4. estimate the output CDF on a fixed threshold grid and test the stopping
//!    rules in [`metrics`];
//! 5. enrich the design with a learning function from [`learning`] (or the
//!    maximin design) and repeat.
//!
//! The analytical and structural test problems live in [`benchmarks`].

pub mod benchmarks;
pub mod designs;
pub mod distributions;
mod error;
pub mod learning;
pub mod metrics;
mod points;
pub mod rng;
pub mod runner;
pub mod surrogates;

pub use error::{Error, Result};
pub use points::PointSet;
