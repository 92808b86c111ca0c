//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Transfer-function or state-space construction violated an invariant.
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// Frequency response requested exactly on a pole.
    #[error("pole at evaluation frequency {omega_rad_s} rad/s")]
    PoleAtFrequency { omega_rad_s: f64 },

    /// Eigenvalue iteration failed or produced roots with a large residual.
    #[error("eigenvalue computation did not converge (residual {residual:.3e})")]
    EigenvalueFailure { residual: f64 },

    /// No -3 dB crossing below the search ceiling.
    #[error("no -3 dB crossing found below {max_hz} Hz")]
    CutoffNotFound { max_hz: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// State norm exceeded the divergence guard during integration.
    #[error("simulation diverged at t = {t_s:.6} s")]
    SimulationDiverged { t_s: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Normal-equation matrix of the estimator is singular.
    #[error("regressor matrix is rank deficient")]
    RankDeficient,

    /// NRMSE reference has zero variance, the fit percentage is undefined.
    #[error("fit metric undefined: reference signal has zero variance")]
    UndefinedFit,

    #[error("signal length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
