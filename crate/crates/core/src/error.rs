use thiserror::Error;

#[derive(Debug, Error)]
pub enum CharflowError {
    #[error("degree exceeds dimension: degree {degree} in dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },

    #[error("form mismatch: {0}")]
    FormMismatch(String),

    #[error("scheme `{requested}` unsupported by model `{model}`; supported: {supported}")]
    UnsupportedScheme {
        requested: String,
        model: String,
        supported: String,
    },

    #[error("radial sampler requires star-shaped level: {0}")]
    NotStarShaped(String),

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("group element is not unimodular: det = {0}")]
    NotUnimodular(f64),

    #[error("fundamental-domain reduction exceeded word length {0}")]
    ReductionCap(usize),

    #[error("singular characteristic solve at {0:?}")]
    SingularField(Vec<f64>),

    #[error("stiff segment at t={0}")]
    StepUnderflow(f64),

    #[error("form is not a primitive of omega (residual {0:.3e})")]
    NotAPrimitive(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CharflowError>;
