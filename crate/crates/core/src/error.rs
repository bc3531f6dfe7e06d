//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A trajectory with no tokens cannot be segmented or scored.
    #[error("empty trajectory")]
    EmptyTrajectory,

    /// Fewer tokens than requested segments.
    #[error("too few tokens for K segments: {token_count} tokens, K = {k}")]
    TooFewTokens { token_count: usize, k: usize },

    /// Boundaries that do not describe K non-empty segments in order.
    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),

    /// A parameter outside its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two inputs that must agree in length do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The rollout oracle could not serve a prefix.
    #[error("oracle unavailable at boundary {boundary}: {reason}")]
    OracleUnavailable { boundary: usize, reason: String },

    /// Neither logged potentials nor an oracle were supplied.
    #[error("no potential source for record {id}")]
    NoPotentialSource { id: String },

    /// A logged potential off the 1/m grid beyond the snap tolerance.
    #[error("potential {value} off 1/{m} grid")]
    OffGrid { value: f64, m: usize },

    /// Entropy weights need at least one valid token.
    #[error("segment has no valid tokens")]
    NoValidTokens,

    /// A record rejected by input validation.
    #[error("record {id}: {message}")]
    Record { id: String, message: String },

    /// Group-relative baselines need at least two trajectories.
    #[error("group of size {0} too small for group-relative baseline")]
    GroupTooSmall(usize),

    /// A regression group whose predictor has zero variance.
    #[error("degenerate regression group: {0}")]
    DegenerateGroup(String),

    /// Policy logits left the numerically safe range during training.
    #[error("policy diverged: logit magnitude {0:.1} exceeds {1:.1}")]
    Diverged(f64, f64),

    /// A stream line that failed to parse, with its 1-based line number.
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config file: {0}")]
    ConfigFile(String),
}
