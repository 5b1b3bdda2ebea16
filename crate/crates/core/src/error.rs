use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no unique Lyapunov solution: {0}")]
    NoUniqueSolution(String),

    #[error("ill-conditioned change of variables (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("infeasible certificate: {0}")]
    InfeasibleCertificate(String),

    #[error("matrix exponential out of range: {0}")]
    Range(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular integrand at node {node:?}: ratio f/f_inf = {ratio:e}")]
    SingularIntegrand { node: Vec<f64>, ratio: f64 },

    #[error("divergent exponential moment: {0}")]
    DivergentMoment(String),

    #[error("inconsistent functionals: {0}")]
    Inconsistency(String),

    #[error("spectral consistency failure: {0}")]
    SpectralMismatch(String),

    #[error("quadrature under-resolved: {0}")]
    UnderResolved(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
