//! Host side of the inspection-station simulator: configuration files, the
//! JSONL event log, PGM frames, batch runs and the live telemetry service.

pub mod config;
pub mod eventlog;
pub mod pgm;
pub mod protocol;
pub mod runner;
pub mod server;

pub use beltline_core as core;
