//! Executable distinguishing games and lattice-distribution checks, with
//! pluggable adversaries, a planted-instance generator and batch runs.
//!
//! Adversaries whose names start with `Clairvoyant` (and the known-frequency
//! solver) read hidden game state. They exist to exercise the games end to end
//! and are not attacks.

pub mod batch;
pub mod dihedral;
pub mod hash_game;
pub mod lattice_suite;
pub mod oracle;
pub mod pke_game;
pub mod planted;
