//! High-order HDG solvers for the Monge-Ampere equation with Dirichlet and optimal-transport
//! boundary conditions, and r-adaptive mesh generation from the resulting maps.

pub mod analysis;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hdg;
pub mod mesh;
pub mod output;
pub mod polynomial;
pub mod problems;
pub mod quadrature;
pub mod reference;
pub mod runner;

pub use error::{Error, Result};
