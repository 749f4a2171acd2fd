use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh construction, assembly and the nonlinear drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error in element {elem}: {msg}")]
    Geometry { elem: usize, msg: String },

    #[error("evaluation error in element {elem}: {msg}")]
    Evaluation { elem: usize, msg: String },

    #[error("singular local block in element {elem} (condition estimate {cond:.3e})")]
    Condensation { elem: usize, cond: f64 },

    #[error("singular global system: {0}")]
    SingularSystem(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("line search stagnated at iteration {iteration} (residual {residual:.3e})")]
    Stagnation { iteration: usize, residual: f64 },

    #[error("tangled mesh: {} element(s) with nonpositive Jacobian, first {:?}", .elements.len(), .elements.first())]
    TangledMesh { elements: Vec<usize> },

    #[error("unknown boundary tag {0}")]
    UnknownTag(u32),

    #[error("i/o error at {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
