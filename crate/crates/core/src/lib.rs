#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod dynamics;
pub mod electronics;
pub mod error;
pub mod geometry;
pub mod jet;
mod lm;
pub mod modes;
pub mod sideband;
pub mod units;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
