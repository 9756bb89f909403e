//! File formats, thread-pool execution and the command line for the
//! `speedcas-core` collision avoidance toolchain.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod jsonl;
pub mod parallel;
pub mod table_io;

pub use error::{Error, Result};
pub use speedcas_core as core;
