#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end for the `penning` toolkit: scenario parsing,
//! subcommand runners, output writing and the acceptance checks.

pub mod checks;
pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;
