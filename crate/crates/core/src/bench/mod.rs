//! Benchmarking support: metrics, runtime estimation and synthetic data.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod runtime;
pub mod synth;
