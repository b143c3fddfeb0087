use thiserror::Error;

use crate::state::{PathLabel, PhotonBasis};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("path filter must name at least one path")]
    EmptyPathFilter,

    #[error("relabel rule is not injective on the state support: {first} and {second} both map to {image}")]
    NonInjectiveRelabel {
        first: String,
        second: String,
        image: String,
    },

    #[error("{element}: photon {basis} is on path {path}, which this stage does not accept")]
    StageContract {
        element: &'static str,
        basis: PhotonBasis,
        path: PathLabel,
    },

    #[error("{element}: {detail}")]
    StageViolation {
        element: &'static str,
        detail: String,
    },

    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    Unnormalized { norm_sqr: f64 },

    #[error("matrix is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invariant violated: {name} (observed {observed})")]
    Invariant { name: String, observed: String },
}

impl Error {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Configuration problems as opposed to violated internal invariants.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NotUnitary { .. }
                | Error::Unnormalized { .. }
                | Error::EmptyPathFilter
        )
    }
}
