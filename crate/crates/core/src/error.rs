use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("receptor is not downwind of the source (x = {0} m)")]
    NotDownwind(f64),

    #[error("wind speed {0} m/s is too low for the plume model")]
    CalmWind(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("wind rose: {0}")]
    WindRose(String),

    #[error("out-of-order data: {0}")]
    OutOfOrder(String),

    #[error("no feasible sensor layout: {0}")]
    NoFeasibleLayout(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
