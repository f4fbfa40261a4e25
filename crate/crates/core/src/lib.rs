//! Numerical laboratory for Newtonian dynamics on manifolds with a generalized
//! Legendre transformation: normality residuals, the Pfaff system for the
//! initial-speed function `ν`, and normal-shift simulation.

pub mod cli;
pub mod config;
pub mod connection;
pub mod crosscheck;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod hypersurface;
pub mod jet;
pub mod legendre;
pub mod normality;
pub mod sampler;

pub use error::{Error, Result};
pub use fields::{evaluate_jet, finite_difference_probe, parse_expression, Expression, PhasePoint};
pub use legendre::{build_modified_hamiltonian, build_riemannian_euclidean, frame_at, SystemDefinition};
