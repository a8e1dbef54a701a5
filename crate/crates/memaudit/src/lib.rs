//! Standard-library companion to `memaudit-core`: dataset ingestion and
//! report persistence, synthetic study generators, a rayon-backed fold
//! driver, and the `memaudit` command-line tool.

pub mod cli;
pub mod config;
pub mod io;
pub mod parallel;
