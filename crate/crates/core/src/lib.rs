//! Critical branching random walks, their incipient infinite variants,
//! super-Brownian-motion moment measures, and lattice models (oriented
//! percolation, uniform spanning forests, invasion percolation) sharing the
//! same r-point-function scaling picture.

pub mod error;
pub mod harness;
pub mod iibrw;
pub mod lattice;
pub mod law;
pub mod maxflow;
pub mod moments;
pub mod op;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
