use thiserror::Error;

use crate::eval::EvalError;
use crate::fingerprint::FingerprintError;
use crate::io::DataError;
use crate::learners::LearnError;
use crate::select::SelectError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Select(#[from] SelectError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
