//! Wavy distributions on the unit interval, Gaussian measures on lattices, the
//! reduction from the unique shortest vector problem to one-dimensional
//! distinguishing, and the public-key cryptosystem and subset-sum hash built on
//! them, all at parameters small enough to run on a desk.

pub mod cli;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod hash;
pub mod lattice;
pub mod numerics;
pub mod pke;
pub mod reductions;

pub use error::{Error, Result};
