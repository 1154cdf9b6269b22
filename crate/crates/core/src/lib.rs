//! Numerical dynamics and stochastic simulation for two population models:
//! selection-mutation dynamics on a phenotype grid, and diploid branching
//! particle systems with their percolation and reaction-diffusion limits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dd;
pub mod error;
pub mod exp;
pub mod ips;
pub mod moran;
pub mod pde;
pub mod percolation;
pub mod selmut;
pub mod simplex;

pub use error::{Error, Result};
pub use simplex::{FitnessParams, Kernel, SimplexMeasure};
