//! File formats, dataset ingestion and the `tra` command line.

pub mod cli;
pub mod dataset;
pub mod io;
