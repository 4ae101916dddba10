//! Renewable-generation game among microgrids on a DC power network.
//!
//! The crate builds the network sensitivity matrix, computes the Nash
//! equilibrium of the generation game directly, simulates the decentralised
//! update schemes that reach it, and injects structural faults into a run.

pub mod cli;
pub mod dynamics;
pub mod exact;
pub mod faults;
pub mod game;
pub mod grid;
pub mod powerflow;
pub mod synth;
