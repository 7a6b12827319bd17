//! Sequence models for irregularly timed consumer events and an
//! interpretable decomposition of predicted default risk.

pub mod cells;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod network;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
