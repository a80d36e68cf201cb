use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("descriptor mismatch: expected `{expected}`, got `{got}`")]
    DescriptorMismatch { expected: String, got: String },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("antipodal points on the sphere: the connecting geodesic is not unique")]
    AntipodalPair,

    #[error("empty sample")]
    EmptySample,

    #[error("weights must contain at least one nonzero entry with positive total")]
    DegenerateWeights,

    #[error("observation {0} is in-bag for every tree; no out-of-bag prediction exists")]
    NoOobTrees(usize),

    #[error("every observation was dropped from the out-of-bag error set")]
    AllObservationsDropped,

    #[error("geodesic solver did not converge")]
    GeodesicNoConvergence,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
