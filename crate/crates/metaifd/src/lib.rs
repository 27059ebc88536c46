//! File formats, snapshots, checkpoints and the `metaifd` command line on
//! top of [`metaifd_core`].

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod provider;
pub mod snapshot;

pub use error::{Error, Result};
