use alloc::string::String;

use crate::empirical::SignalKey;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("outcome {0} is outside the declared outcome space")]
    OutOfSpace(String),
    #[error("{0}")]
    InvalidTask(String),
    #[error("trial {trial}: behavioral action is equidistant from distinct human and AI recommendations")]
    AmbiguousChoice { trial: String },
    #[error("trial {trial}: behavioral action matches neither recommendation")]
    UnmatchedAction { trial: String },
    #[error("no observations")]
    Empty,
    #[error("no disagreement observations; reliance level is undefined")]
    UndefinedReliance,
    #[error("signal {0:?} has zero marginal probability")]
    MissingSignal(SignalKey),
    #[error("k = {k} exceeds the number of distinct vectors ({distinct})")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate holdout split: {0}")]
    DegenerateSplit(String),
    #[error("value of rational complementation {0} is too small to normalize by")]
    DegenerateDelta(f64),
    #[error("participant {0} has disagreement trials but no reliance count")]
    MissingParticipant(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("analytic oracle unsupported: {0}")]
    UnsupportedOracle(String),
}
