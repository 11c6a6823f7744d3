use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension {dimension} exceeds the dense oracle cap {cap}")]
    OracleScale { dimension: usize, cap: usize },

    #[error("wave field is not normalized (weighted norm² = {norm_sq})")]
    Normalization { norm_sq: f64 },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("energy {energy} lies within the pole guard of Q-space eigenvalue {pole}")]
    PoleProximity { energy: f64, pole: f64 },

    #[error("|psi| = {magnitude:e} at index {index}: quantization rule divides by a node")]
    NodeSingularity { index: usize, magnitude: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("time step {dt} exceeds the accuracy budget (max {max_dt})")]
    StepSize { dt: f64, max_dt: f64 },

    #[error("time step {dt} exceeds the stability budget; suggested dt = {suggested}")]
    Stability { dt: f64, suggested: f64 },

    #[error("non-finite value encountered at step {step}")]
    BlowUp { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
