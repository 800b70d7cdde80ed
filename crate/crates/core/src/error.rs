use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested load is at or above the critical capacity, where
    /// the typical log-volume per weight diverges to minus infinity.
    #[error("alpha = {alpha} is at or beyond the critical capacity alpha_c = {alpha_c}")]
    Diverged { alpha: f64, alpha_c: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("solver did not converge after {epochs} epochs (kappa gap {gap:e})")]
    Convergence { epochs: usize, gap: f64 },

    /// A zero weight would need an infinitely squeezed mode.
    #[error("weight on mode {mode} is zero; the circuit would need infinite squeezing")]
    DegenerateWeight { mode: usize },

    #[error("mode index {index} out of range for a {n_modes}-mode state")]
    ModeIndex { index: usize, n_modes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("volume stage {stage} (constraint {constraint}) had no accepted samples")]
    StageFailure { stage: usize, constraint: usize },

    #[error("SAT probability is not monotone in alpha: {0}")]
    NonMonotone(String),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
