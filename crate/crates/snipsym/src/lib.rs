//! File IO, external processes and the command line around `snipsym-core`.

pub mod cli;
pub mod compile;
pub mod config;
pub mod ingest;
pub mod pipeline;
mod process;
pub mod remote;
pub mod session;
