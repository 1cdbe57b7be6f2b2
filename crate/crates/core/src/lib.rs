//! Static traffic assignment under road closures and surrogate models of the
//! resulting total travel time.

pub mod cli;
pub mod config;
pub mod data;
pub mod eval;
pub mod features;
pub mod heuristics;
mod linalg;
pub mod network;
pub mod scenario;
pub mod surrogates;
pub mod tap;
