use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("inadmissible coefficients at r = {r:.6} (node {node}): {reason}")]
    Admissibility { node: usize, r: f64, reason: String },

    #[error("unsupported coefficient family: {0}")]
    UnsupportedFamily(String),

    #[error("degenerate {quantity} at node {node} (r = {r:.6}): |value| = {value:.3e} < {bound:.3e}")]
    Degeneracy { quantity: String, node: usize, r: f64, value: f64, bound: f64 },

    #[error("solvability condition failed: {quantity} = {value:.3e} (threshold {threshold:.3e})")]
    Solvability { quantity: String, value: f64, threshold: f64 },

    #[error("no convergence after {iterations} iterations (last increment {increment:.3e}, measured contraction {factor:.3e})")]
    NonConvergence { iterations: usize, increment: f64, factor: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn shape(expected: usize, got: usize) -> Self {
        Error::Shape { expected, got }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::shape(expected, got))
    }
}
