//! Command-line front-end: scenario files, batch commands and their outputs.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;

pub use commands::run;
