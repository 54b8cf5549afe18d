//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violated its constraint.
    #[error("config error for `{key}`: {message}")]
    Config { key: String, message: String },

    /// A function received an argument outside its domain.
    #[error("domain error in {operation}: {message}")]
    Domain { operation: String, message: String },

    /// A factorization hit a non-positive pivot; the matrix is not positive
    /// definite (or is numerically singular).
    #[error("matrix not positive definite: pivot {pivot_index} = {pivot_value:.6e}")]
    NotPositiveDefinite { pivot_index: usize, pivot_value: f64 },

    /// LU elimination found no usable pivot in a column.
    #[error("singular matrix in {stage}: no pivot in column {column}")]
    Singular { stage: String, column: usize },

    /// An iterative solver ran out of iterations.
    #[error("{stage} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        stage: String,
        iterations: usize,
        residual: f64,
    },

    /// Mismatched dimensions between operands.
    #[error("dimension mismatch in {operation}: {message}")]
    Dimension { operation: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn domain(operation: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Domain {
            operation: operation.into(),
            message: message.into(),
        }
    }

    pub fn dimension(operation: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Dimension {
            operation: operation.into(),
            message: message.into(),
        }
    }
}
