//! File formats, synthetic fixtures and the command-line front end for the
//! census table reader. All numerics live in `tablereader_core`.

pub mod cli;
pub mod config;
pub mod eval;
pub mod formats;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod synth;

pub use cli::run_cli;
