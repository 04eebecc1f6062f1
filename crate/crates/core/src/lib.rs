//! Embedded-fracture multicontinuum flow on a fine grid and its nonlocal
//! multicontinua (NLMC) upscaling.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: fine grid, embedded fracture mesh, coarse grid, continuum
//!   enumeration and oversampled regions.
//! - [`linalg`]: CSR matrices, triple products and direct solvers.
//! - [`fine_system`]: finite-volume operators `M`, `A`, `Q`, `F` and the
//!   implicit reference time stepper.
//! - [`nlmc`]: constrained local basis problems, the projection `R` and the
//!   upscaled coarse model.
//! - [`metrics`]: coarse averaging and relative errors.

pub mod fine_system;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod nlmc;

mod error;

pub use error::Error;
