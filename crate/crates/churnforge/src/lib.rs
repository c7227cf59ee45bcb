//! File formats, reports and the `churnforge` command line built on
//! [`churnforge_core`].

pub mod cli;
pub mod config;
pub mod ingest;
pub mod manifest;
pub mod report;

pub use churnforge_core as core;
