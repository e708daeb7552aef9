//! Channel simulation and distributed matching over shared randomness.
//!
//! The crate is organised bottom-up:
//!
//! * [`dist`]: 1-D densities, ratio bounds and divergences.
//! * [`randomness`]: the keyed, random-access common randomness.
//! * [`samplers`]: rejection sampling, Gumbel-max selection, ensemble
//!   rejection sampling, the Poisson race and discrete greedy rejection.
//! * [`coder`]: prefix codes and index codecs.
//! * [`matching`]: two-party matching protocols and their bounds.
//! * [`wynerziv`]: hashed distributed compression with decoder side
//!   information.
//! * [`stats`]: small statistics helpers shared by tests and experiments.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coder;
pub mod dist;
pub mod error;
pub mod matching;
pub mod quad;
pub mod randomness;
pub mod samplers;
pub mod stats;
pub mod wynerziv;

pub use dist::DistributionSpec;
pub use error::{Error, Result};
pub use randomness::CommonRandomness;
