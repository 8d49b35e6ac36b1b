use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operation called with arguments it does not accept (wrong mode count, cutoff too small, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Evaluation point outside the sampled extent of a grid.
    #[error("point {0} lies outside the grid extent")]
    Domain(String),

    /// Malformed distribution file or family expression.
    #[error("input format error: {0}")]
    Format(String),

    /// s-ordered input whose conversion to the Wigner characteristic function overflows.
    #[error("s-parameter conversion out of range: {0}")]
    ConversionRange(String),

    /// Declared elliptical form does not make the distribution circular.
    #[error("declared elliptical form is inconsistent: angular residual {residual:.3e} exceeds {threshold:.1e}")]
    SymmetryViolation { residual: f64, threshold: f64 },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
