use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate junction: {0}")]
    AngleDegeneracy(String),

    #[error("definiteness error: {0}")]
    Definiteness(String),

    /// Lists every violated bound with its numeric value.
    #[error("infeasible kernel widths: {}", .0.join("; "))]
    Infeasible(Vec<String>),

    #[error("non-positive mobility: {0}")]
    NonpositiveMobility(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),
}
