use thiserror::Error;

/// Coarse classification used by the command-line exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Bad configuration, file or argument.
    Input,
    /// The numerical setup is inconsistent (background, spectrum, guess).
    Setup,
    /// An iterative solve did not converge.
    Nonconvergence,
    /// A consistency check that should never fail did.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("background height at the surface is {h0}, expected 1 within {tol:e}")]
    NormalizationInconsistency { h0: f64, tol: f64 },
    #[error("background is stagnant (H_p = {value}) at p-node {node}")]
    StagnantBackground { node: usize, value: f64 },
    #[error("unstable stratification (rho_p = {value} > 0) at p-node {node}")]
    UnstableStratification { node: usize, value: f64 },
    #[error("stagnation: h_p = {value} at node (q-index {i}, p-index {j})")]
    Stagnation { i: usize, j: usize, value: f64 },
    #[error("{0} not found")]
    NotFound(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("stability assumption violated: {0}")]
    StabilityAssumption(String),
    #[error("stratification assumption violated: {0}")]
    StratificationAssumption(String),
    #[error("guess quality: {0}")]
    GuessQuality(String),
    #[error("domain truncation: {0}")]
    DomainTruncation(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("Newton did not converge after {iterations} iterations; residual history {history:?}")]
    Nonconvergence { iterations: usize, history: Vec<f64> },
    #[error("singular Jacobian at pivot {0}")]
    SingularJacobian(usize),
    #[error("singular bordered system (branch point) at pivot {0}")]
    BranchPoint(usize),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Input(_)
            | Error::Domain(_)
            | Error::Degenerate(_)
            | Error::Precondition(_)
            | Error::GuessQuality(_)
            | Error::DomainTruncation(_)
            | Error::Io { .. }
            | Error::Parse { .. } => Category::Input,
            Error::NormalizationInconsistency { .. }
            | Error::StagnantBackground { .. }
            | Error::UnstableStratification { .. }
            | Error::NotFound(_)
            | Error::StabilityAssumption(_)
            | Error::StratificationAssumption(_) => Category::Setup,
            Error::Stagnation { .. }
            | Error::Nonconvergence { .. }
            | Error::SingularJacobian(_)
            | Error::BranchPoint(_) => Category::Nonconvergence,
            Error::Consistency(_) => Category::Internal,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
