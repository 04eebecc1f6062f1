//! Nonlocal multicontinua upscaling: constrained local bases on oversampled
//! regions, the projection `R`, the coarse model and its time stepper.

mod basis;
mod upscaled;

pub use basis::{
    build_bases, build_constraints, solve_basis, solve_region_bases, BasisFunction, BasisSet,
    ConstraintOperator,
};
pub use upscaled::{
    aggregation_matrix, assemble_projection, assemble_upscaled, coarse_step, downscale,
    CoarseState, CoarseStepper, ExchangeVariant, ProjectionMatrix, UpscaleOptions, UpscaledModel,
};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlmcError {
    #[error("local problem on region rooted at coarse cell {region} is singular (pivot {pivot})")]
    SingularRegion { region: usize, pivot: usize },
    #[error("local problem on region rooted at coarse cell {region}: {source}")]
    Region { region: usize, source: LinalgError },
    #[error("no basis function for coarse DOF {dof}")]
    IncompleteSpace { dof: usize },
    #[error("coarse DOF {dof} has more than one basis function")]
    DuplicateBasis { dof: usize },
    #[error("coarse DOF {dof} is not owned by the root of the region")]
    ForeignOwner { dof: usize },
    #[error("oversampling needs at least one layer")]
    NoLayers,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl NlmcError {
    fn region(region: usize, e: LinalgError) -> Self {
        match e {
            LinalgError::Singular { pivot } => NlmcError::SingularRegion { region, pivot },
            other => NlmcError::Region { region, source: other },
        }
    }
}
