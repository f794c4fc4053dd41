//! Experiment configs, the preset catalog, the run pipeline, and the file
//! formats it produces. The `qcwave` binary is a thin argument parser over
//! this crate.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
