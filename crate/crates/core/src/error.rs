use thiserror::Error;

use crate::lattice::ModeIndex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the zero mode (0,0) carries no coefficient")]
    ZeroMode,

    #[error("mode {mode} lies outside the truncation |k1|,|k2| <= {truncation}")]
    OutsideTruncation { mode: ModeIndex, truncation: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite coefficient at mode {mode} (t = {time})")]
    NonFinite { mode: ModeIndex, time: f64 },

    #[error(
        "support reaches |k|_inf = {support_radius}, which needs a margin of {required} \
         from the truncation radius {truncation}"
    )]
    MarginViolation {
        support_radius: usize,
        required: usize,
        truncation: usize,
    },

    #[error("state is not on the even-k2 sublattice (mode {mode} is nonzero)")]
    OddSublattice { mode: ModeIndex },

    #[error("shear amplitude theta_e = {theta_e} must be positive")]
    NonPositiveShear { theta_e: f64 },

    #[error("truncation mismatch: evaluator built for N = {expected}, state has N = {found}")]
    TruncationMismatch { expected: usize, found: usize },

    #[error("transform evaluator failed calibration against the direct sum: {0}")]
    Calibration(String),

    #[error(
        "relative drift {drift:.3e} of sum theta^2 exceeds budget {allowed:.3e} at t = {time} \
         (dt = {dt:.3e})"
    )]
    DriftBreach {
        drift: f64,
        allowed: f64,
        time: f64,
        dt: f64,
    },

    #[error("{location}: {message}")]
    Config { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
