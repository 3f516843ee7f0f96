//! Branching random walks on Z^d with finitely many branching sources.

pub mod config;
pub mod green;
pub mod kernel;
pub mod lattice;
pub mod moments;
pub mod output;
pub mod presets;
pub mod simulator;
pub mod spectral;
pub mod verify;
