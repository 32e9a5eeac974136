//! Finite-sample confidence sets and p-values for parameters observed only
//! through privatized summaries, by simulation from a fixed seed bank.

pub mod baselines;
pub mod depth;
pub mod dist;
pub mod engine;
pub mod error;
pub mod inference;
pub mod mechanisms;
pub mod models;

pub use error::{Error, Result};
