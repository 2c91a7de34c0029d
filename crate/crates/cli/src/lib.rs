//! Library surface of the CLI crate: the benchmark registry, the problem
//! configuration loader, and the output formats. The binary in `main.rs`
//! wires these into subcommands.

pub mod benchmarks;
pub mod config;
pub mod output;
