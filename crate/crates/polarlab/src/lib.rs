//! File formats, a thread-pool executor and the command-line front end for
//! `polarlab-core`.

pub mod cli;
pub mod exec;
pub mod formats;
pub mod runners;
