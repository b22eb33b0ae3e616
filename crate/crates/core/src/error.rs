use thiserror::Error;

/// Errors raised by calibration, bound and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty distribution: total weight must be positive")]
    EmptyDistribution,

    #[error("invalid weight {weight} at atom {index}: weights must be finite and nonnegative")]
    InvalidWeight { index: usize, weight: f64 },

    #[error("invalid score {0}: scores must be finite reals or +inf")]
    InvalidScore(f64),

    #[error("invalid quantile level {0}: must be a finite value > 0")]
    InvalidLevel(f64),

    #[error("invalid alpha {0}: must lie in (0, 1)")]
    InvalidAlpha(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty scores")]
    EmptyScores,

    #[error("invalid group simplex: {0}")]
    InvalidSimplex(String),

    #[error("group count mismatch: expected K = {expected}, got {got}")]
    GroupCountMismatch { expected: usize, got: usize },

    #[error("group {group} out of range for K = {groups}")]
    GroupOutOfRange { group: usize, groups: usize },

    #[error("invalid grouped scores: {0}")]
    InvalidGroupedScores(String),

    #[error("no observed groups: every group has zero calibration points")]
    NoObservedGroups,

    #[error("undefined weight for group {group}: estimated probability is zero")]
    UndefinedWeight { group: usize },

    #[error("closed-form hypothesis not met: min p = {min_p} < 8 ln(n)/n = {required}")]
    HypothesisNotMet { min_p: f64, required: f64 },

    #[error("(1 - alpha) * K = {0} is not an integer")]
    NonIntegerTargetGroups(f64),

    #[error("trial count must be at least 1")]
    ZeroTrials,

    #[error("invalid sample size n = {0}")]
    InvalidSampleSize(usize),

    #[error("invalid sampling scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid group model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
