//! Filesystem, command-line and synthetic-data companion to
//! `ontolearn-core`.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod formats;
pub mod io;
pub mod parallel;
pub mod synth;
pub mod workflow;
