//! Exact one-dimensional Wasserstein-1 computations, stationary process
//! generators, summability checks and limit-law sampling for the `L¹`
//! empirical central limit theorem.
//!
//! The crate is `no_std` with `alloc`; IO, parallelism and the command line
//! live in the companion `w1clt` crate.

#![no_std]
// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod compare;
pub mod conditions;
pub mod error;
pub mod experiment;
pub mod limitlaw;
pub mod math;
pub mod model;
pub mod processes;
pub mod quad;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use model::{DistributionModel, Interpolation, Pushforward, PushforwardBase, TabulatedCdf, TailClass};
pub use transport::{ExtendedReal, SortedSample};
