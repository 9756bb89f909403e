//! Core of a speed-advisory collision avoidance toolchain: lattice MDP
//! construction and solution, table-driven policies, synthetic encounter
//! generation, closed-loop simulation and safety metrics.
//!
//! The crate is `no_std` with `alloc`; file formats, threading and the
//! command line live in the companion `speedcas` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod encounters;
pub mod error;
pub mod grid;
pub mod logic;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use grid::DiscretizationGrid;
pub use logic::{Advisory, Dimension, LogicKind, LogicSpec, SpeedState};
pub use policy::{best_action, blend, qmdp_action, CompositeAdvisory, QTable};
pub use solver::{solve, StagedMdp};
