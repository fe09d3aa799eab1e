//! Perimeter plus a nonlocal radial-kernel energy on star-shaped sets.

pub mod cli;
pub mod error;
pub mod estimates;
pub mod kernels;
pub mod minimizer;
pub mod nonlocal_energy;
pub mod quadrature;
pub mod sphere_grid;
pub mod star_shape;

pub use error::{Error, Result};
