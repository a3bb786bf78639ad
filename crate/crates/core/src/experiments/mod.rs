//! Figure presets, the Monte Carlo runner and CSV output.

pub mod config;
pub mod csv;
pub mod preset;
pub mod runner;

pub use config::{ConfigFile, Quantity};
pub use csv::{emit_csv, write_csv, HEADER};
pub use preset::{
    describe, preset, ExperimentSpec, Layout, Metric, Periods, Protocol, Sweep, SweepVar,
    PRESET_IDS,
};
pub use runner::{run_experiment, TrialRecord};
