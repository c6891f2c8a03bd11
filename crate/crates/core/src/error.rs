use thiserror::Error;

use crate::system_model::UserId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("profile {profile} out of range (P = {profiles})")]
    ProfileOutOfRange { profile: usize, profiles: usize },

    #[error("user {0} is already present")]
    DuplicateUser(UserId),

    #[error("user {0} is not present")]
    UnknownUser(UserId),

    #[error("churn events out of order: time {next} after {prev}")]
    UnorderedEvents { prev: u64, next: u64 },

    /// The cyclic index-set window needs `t_bar + alpha_bar <= P`.
    #[error("unsupported regime: t_bar + alpha_bar = {needed} exceeds P = {profiles}")]
    UnsupportedRegime { needed: usize, profiles: usize },

    #[error("packet assignment for t_bar = {0} needs the constraint-search assigner")]
    NeedsConstraintSearch(usize),

    #[error("stream to {target} needs nulling at {needed} users, budget is {budget}")]
    SuppressionBudget {
        target: String,
        needed: usize,
        budget: usize,
    },

    #[error("decodability violated: {0}")]
    Undecodable(String),

    #[error("subpacket {subpacket} of packet {packet} delivered twice to {target}")]
    DuplicateDelivery {
        target: String,
        packet: usize,
        subpacket: u32,
    },

    #[error("DoF undefined: {0}")]
    UndefinedDof(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("counted DoF {counted} differs from closed form {closed} at eta_hat = {eta_hat}")]
    DofMismatch {
        eta_hat: usize,
        counted: String,
        closed: String,
    },

    #[error("no length distribution with sigma within {tolerance} of {target}")]
    NoFeasibleDistribution { target: f64, tolerance: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
