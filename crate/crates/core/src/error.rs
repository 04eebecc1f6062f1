use thiserror::Error;

use crate::fine_system::PropertyError;
use crate::geometry::GeometryError;
use crate::linalg::LinalgError;
use crate::nlmc::NlmcError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Properties(#[from] PropertyError),
    #[error(transparent)]
    Nlmc(#[from] NlmcError),
}
