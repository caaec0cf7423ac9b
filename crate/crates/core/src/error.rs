use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("artist index {index} out of range for {n} artists")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("fraud level for artist {index} must be non-negative and finite, got {value}")]
    NegativeFraud { index: usize, value: f64 },

    #[error("profile has {got} entries, game has {expected} artists")]
    ProfileLength { expected: usize, got: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("operation requires the {expected} regime")]
    WrongRegime { expected: &'static str },

    #[error("no dishonest-set size is consistent with the equilibrium conditions")]
    NoConsistentCandidate,

    #[error("cutoff identity violated: d* = {d_star}, (1+T*) - (1+T*)^2/V = {implied}")]
    CutoffMismatch { d_star: f64, implied: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("blend weight alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),

    #[error("operation needs the raw platform constants (m, lambda_bar, lambda0, uc_shares)")]
    MissingRawConstants,

    #[error("fairness condition ({condition}) disagrees with direct min-utility comparison ({direct})")]
    FairnessMismatch { condition: bool, direct: bool },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// Numerical failures of a solver or root finder, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConsistentCandidate
                | Error::CutoffMismatch { .. }
                | Error::NoConvergence { .. }
                | Error::NotBracketed { .. }
                | Error::FairnessMismatch { .. }
        )
    }
}
