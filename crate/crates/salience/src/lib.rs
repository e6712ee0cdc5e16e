//! IO, configuration, remote scoring, the CLI pipeline and the HTTP service
//! around `salience-core`.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod remote;
pub mod service;
pub mod synth;

pub use salience_core as core;
