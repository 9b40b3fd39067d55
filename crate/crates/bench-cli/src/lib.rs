//! Experiment harness for the `sqp` sampling structures.

pub mod cli;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod sparse;
