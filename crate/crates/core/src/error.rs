use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("monomial {0} is not a product of at most two basis elements")]
    UnrepresentableMonomial(String),

    #[error(
        "adaptation did not converge after {iterations} iterations (worst minor {worst_minor:.6e})"
    )]
    AdaptationDidNotConverge { iterations: u64, worst_minor: f64 },

    #[error("synthesis failed: no certificate found after {attempts} attempts (best worst minor {best_minor:.6e})")]
    SynthesisFailed { attempts: usize, best_minor: f64 },

    #[error("goal ({0:.4}, {1:.4}) is outside the reachable workspace")]
    UnreachableGoal(f64, f64),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
