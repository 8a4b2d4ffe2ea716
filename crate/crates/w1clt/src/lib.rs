//! Experiment harness, file formats and CLI around [`w1clt_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;

pub use error::{HarnessError, Result};
