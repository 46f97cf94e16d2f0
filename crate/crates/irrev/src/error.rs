//! One error enum for the whole crate. Variants map one-to-one onto the ways a
//! model can be rejected, so callers can match on the reason instead of parsing
//! message strings.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero polynomial has no roots")]
    ZeroPolynomial,
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,

    #[error("spectral density has a pole on the imaginary axis")]
    AxisPole,
    #[error("spectral density is not nonnegative on the imaginary axis")]
    NotNonnegative,

    #[error("R = J + J^T is singular or not positive definite")]
    RSingular,
    #[error("Riccati equation has no stabilizing solution")]
    NoStabilizingSolution,

    #[error("transfer function is not strictly proper")]
    NotStrictlyProper,
    #[error("numerator and denominator are not coprime")]
    NotCoprime,
    #[error("matrix (or polynomial) is not Hurwitz")]
    NotHurwitz,
    #[error("state covariance is singular; the pair (F, G) is not controllable")]
    PSingular,

    #[error("K = -1 has no impedance image under the Cayley map")]
    KIsMinusOne,
    #[error("Z0 = -1 has no inner image under the Cayley map")]
    Z0IsMinusOne,
    #[error("function fails the lossless (Foster) conditions")]
    NotLossless,

    #[error("output functional is identically zero")]
    DegenerateOutput,

    #[error("covariance lag must be nonnegative; use the transpose symmetry for negative lags")]
    NegativeLag,

    #[error("step size dt must be positive")]
    NonPositiveDt,
    #[error("load has direct feedthrough; the scattering junction would be an algebraic loop")]
    AlgebraicLoop,
    #[error("closed loop is not asymptotically stable")]
    UnstableClosedLoop,
    #[error("observation direction c is zero")]
    ZeroDirection,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("path is too short for the requested operation")]
    PathTooShort,

    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
