use alloc::string::String;
use alloc::vec::Vec;

/// Everything that can go wrong inside the library.
///
/// The CLI maps these onto exit codes, so the grouping matters: configuration
/// problems, admissibility failures at the chosen resolution and violated
/// theorem hypotheses are kept apart.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trajectory blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("pair is not periodic: |phi(T, x0) - x0| = {defect:e}")]
    NotPeriodic { defect: f64 },

    #[error(
        "matrix is not hyperbolic: eigenvalue {re} + {im}i is within {tol:e} of the imaginary axis"
    )]
    NotHyperbolic { re: f64, im: f64, tol: f64 },

    #[error("pair (A, B) is not controllable: Kalman rank {rank} < {dim}")]
    NotControllable { rank: usize, dim: usize },

    #[error("reference control is not an interior point of the control range (margin {margin:e})")]
    NotInterior { margin: f64 },

    #[error("not an equilibrium: |F(x0, u0)| = {defect:e}")]
    NotEquilibrium { defect: f64 },

    #[error("equilibrium pair is not regular: linearization has Kalman rank {rank} < {dim}")]
    NotRegular { rank: usize, dim: usize },

    #[error("(K, Q) not admissible at this resolution (horizon index {n:?}): {} grid point(s) uncovered", uncovered.len())]
    NotAdmissible {
        n: Option<usize>,
        uncovered: Vec<usize>,
    },

    #[error("lower bound is vacuous: no sampled pair stays in Q on [0, tau] (bound is -inf)")]
    VacuousBound,

    #[error("degenerate hull: volume {volume:e} below threshold")]
    Degenerate { volume: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of a hypothesis of the pressure theorems.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::NotHyperbolic { .. }
                | Error::NotControllable { .. }
                | Error::NotInterior { .. }
                | Error::NotEquilibrium { .. }
                | Error::NotRegular { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
