//! Fine grid, embedded fracture mesh, coarse grid and oversampled regions.
//!
//! Every product in this module is built once and immutable afterwards, so
//! the types are `Send + Sync` and can be shared read-only by the basis
//! workers.

mod coarse;
mod fine;
mod fracture;

pub use coarse::{CoarseGrid, ContinuumIndex, FractureContinuum, OversampleRegion};
pub use fine::{Facet, FineGrid, Point, Rect};
pub use fracture::{
    mesh_fractures, FractureCell, FractureGeometry, FractureLink, FractureMesh, Segment,
    COLLINEAR_NUDGE, CONTACT_TOLERANCE, MIN_CELL_FRACTION,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid fracture geometry: {0}")]
    InvalidGeometry(String),
    #[error("segment {segment} endpoint ({x}, {y}) lies outside the domain")]
    OutsideDomain { segment: usize, x: f64, y: f64 },
    #[error("fracture file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Builds a uniform `nx` x `ny` grid over `domain`.
pub fn build_fine_grid(nx: usize, ny: usize, domain: Rect) -> Result<FineGrid, GeometryError> {
    FineGrid::new(nx, ny, domain)
}

/// Builds the coarse grid of `mx` x `my` cells nested in `fine`.
pub fn build_coarse_grid(fine: &FineGrid, mx: usize, my: usize) -> Result<CoarseGrid, GeometryError> {
    CoarseGrid::new(fine, mx, my)
}

pub fn build_continuum_index(
    coarse: &CoarseGrid,
    fmesh: &FractureMesh,
    n_matrix: usize,
) -> ContinuumIndex {
    ContinuumIndex::new(coarse, fmesh, n_matrix)
}

pub fn build_oversample(
    coarse: &CoarseGrid,
    fmesh: &FractureMesh,
    index: &ContinuumIndex,
    root: usize,
    layers: usize,
) -> OversampleRegion {
    OversampleRegion::new(coarse, fmesh, index, root, layers)
}
