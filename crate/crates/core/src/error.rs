use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid reward specification: {0}")]
    InvalidReward(String),

    #[error("need at least as many arms as players (players={players}, arms={arms})")]
    NotEnoughArms { players: usize, arms: usize },

    #[error("instance too large for exhaustive enumeration: {what} (limit {limit})")]
    EnumerationGuard { what: String, limit: usize },

    #[error("degenerate instance: every profile attains the same objective")]
    DegenerateInstance,

    #[error("state space of {states} states exceeds the budget of {budget}")]
    StateSpaceGuard { states: usize, budget: usize },

    #[error("linear system singular to tolerance (pivot {0:.3e}); the chain may be reducible")]
    SingularSystem(f64),

    #[error("stationary residual {0:.3e} exceeds tolerance; the chain may be reducible")]
    ResidualTooLarge(f64),

    #[error("mixing time exceeded {cap} iterations (last total-variation distance {last_tv:.6})")]
    MixingCap { cap: u64, last_tv: f64 },

    #[error(
        "escape exponent too small: c = {c} but the dynamics require c > {required} \
         (deficit {deficit:.6})"
    )]
    EscapeExponentTooSmall { c: f64, required: f64, deficit: f64 },

    #[error("optimal assignment is not unique; margin-based analysis is undefined")]
    NonUniqueOptimum,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
