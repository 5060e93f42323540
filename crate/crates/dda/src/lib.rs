//! Std companion to `dda-core`: PNG and weights files, synthetic datasets on
//! disk, a rayon executor, JSON reports and the `dda` command line.

pub mod cli;
pub mod dataset;
pub mod exec;
pub mod pngio;
pub mod report;
pub mod weights_file;

pub use exec::Rayon;
