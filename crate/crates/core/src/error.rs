use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("transition row `{row}` is not a distribution (sum = {sum})")]
    Stochasticity { row: String, sum: f64 },

    #[error("reward entry `{entry}` is positive ({value}); rewards must be <= 0")]
    PositiveReward { entry: String, value: f64 },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("unknown builtin example `{0}`")]
    UnknownBuiltin(String),

    #[error("enumeration size {size:.3e} exceeds cap {cap}")]
    CapExceeded { size: f64, cap: u64 },

    #[error("operation requires deterministic transition dynamics")]
    StochasticDynamics,

    #[error("operation requires a deterministic policy")]
    StochasticPolicy,

    #[error("lookahead {n} exceeds the remaining horizon at state `{state}` (t = {t})")]
    HorizonExceeded { n: usize, state: String, t: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
