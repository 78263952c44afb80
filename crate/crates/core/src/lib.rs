//! Exact simulator and verification oracles for the symmetric simple
//! exclusion process on `{1, ..., N-1}` with slow boundary reservoirs.

pub mod engine;
pub mod init;
pub mod theory;
pub mod tridiag;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod observables;
pub mod pde;
pub mod sum;

pub use error::{Error, Result};
