use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("point ({x}, {y}) lies outside the closed domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("line misses the domain")]
    LineMisses,
    #[error("line is tangent to the domain (chord shorter than tolerance)")]
    Tangent,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid activity measure: {0}")]
    InvalidActivity(String),
    #[error("activity density vanishes on every direction through ({x}, {y})")]
    ZeroDensity { x: f64, y: f64 },
    #[error("quadrature did not converge: estimate {estimate}, error {error_estimate}, {subdivisions} subdivisions")]
    Quadrature {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },
    #[error("invalid marker configuration: {0}")]
    InvalidMarkers(String),
    #[error("enumeration cap exceeded: {size} > {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("simulation failure: {message}\nevent log:\n{log}")]
    Simulation { message: String, log: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
