use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// Variants map one-to-one onto the failure classes of the pipeline so the
/// CLI can report them without inspecting messages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("missing channel: {0}")]
    Channel(String),
    #[error("out of bounds: {0}")]
    Bounds(String),
    #[error("CRS mismatch: {left} vs {right}")]
    Crs { left: String, right: String },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid normalization stats: {0}")]
    Stats(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite values: {0}")]
    Numerics(String),
    #[error("no within-station variation in the smoke regressor")]
    NoWithinVariation,
    #[error("not enough degrees of freedom: n={n_obs}, stations={n_stations}, regressors={n_regressors}")]
    Dof {
        n_obs: usize,
        n_stations: usize,
        n_regressors: usize,
    },
    #[error("singular design matrix")]
    Singular,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
