//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates a standing assumption (positivity, kappa > 1, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A state left the admissible region 0 <= x_i <= 1 + zeta_i(x).
    #[error("state outside domain at t = {t}: x[{index}] = {value}")]
    OutsideDomain { t: f64, index: usize, value: f64 },

    #[error("firing set is empty")]
    EmptyFiringSet,

    /// A firing-set member is not at its threshold surface.
    #[error("oscillator {index} is not at threshold: x = {value}, threshold = {threshold}")]
    NotAtThreshold {
        index: usize,
        value: f64,
        threshold: f64,
    },

    /// Adaptive step control drove the step below the representable floor.
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    /// No threshold crossing was found before the integration horizon.
    #[error("no threshold crossing before t = {horizon} (flow may violate positivity)")]
    NoCrossing { horizon: f64 },

    /// A root-finding bracket could not be established.
    #[error("no sign change while solving {0}")]
    NoBracket(String),

    /// The a-sequence left the range of the core map.
    #[error("a-sequence terminates at index {index}: a = {value} is outside the range of the map")]
    ASequenceOutOfRange { index: usize, value: f64 },

    /// The perturbation bound is vacuous.
    #[error("perturbation bound requires mu_r < mu (got mu_r = {mu_r}, mu = {mu})")]
    VacuousBound { mu_r: f64, mu: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
