use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid decision vector: {0}")]
    Encoding(String),

    #[error("invalid simulation input: {0}")]
    Input(String),

    /// Accumulation reached jam density while travelers were still inside.
    #[error("simulation stalled at t = {time:.4} min with {inside} travelers inside")]
    Stall { time: f64, inside: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),
}

impl Error {
    pub fn is_stall(&self) -> bool {
        matches!(self, Error::Stall { .. })
    }
}
