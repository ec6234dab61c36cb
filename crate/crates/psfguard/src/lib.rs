//! Simulator front end for `psfguard-core`: scenario files, telemetry,
//! binary dumps, headless runs and the live WebSocket session.

pub use psfguard_core as core;

pub mod catalog;
pub mod io;
pub mod runner;
pub mod scenario_file;
pub mod server;
pub mod telemetry;
