use thiserror::Error;

use crate::bracketing::BracketingError;
use crate::eigs::EigsError;
use crate::grid2d::GridError;
use crate::model::ConfigError;
use crate::oned::OnedError;
use crate::quad::QuadError;
use crate::weyl::WeylError;

/// Crate-level error. Configuration problems are separated from
/// computational failures so callers (and the CLI exit code) can tell them
/// apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eigs(#[from] EigsError),
    #[error(transparent)]
    Oned(#[from] OnedError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error(transparent)]
    Bracketing(#[from] BracketingError),
    #[error("{0}")]
    Computation(String),
}

impl Error {
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Bracketing(e) => e.is_config(),
            _ => false,
        }
    }
}
