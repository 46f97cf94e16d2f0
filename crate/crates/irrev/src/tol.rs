//! Numerical tolerances used across the crate. Every cutoff that decides
//! whether a model is accepted lives here, with the convention (absolute vs
//! relative) stated next to it.

/// A root is counted strictly stable when its real part is below `-TOL_HURWITZ`
/// (absolute, the axis band is `±TOL_HURWITZ`).
pub const TOL_HURWITZ: f64 = 1e-9;

/// Two roots are treated as equal for cancellation when they differ by less
/// than this, relative to `max(1, |root|)`.
pub const TOL_COPRIME: f64 = 1e-8;

/// Roots of even polynomials this close to the imaginary axis (relative to the
/// root cluster scale) are resolved as axis roots during spectral factorization.
/// Looser than `TOL_COPRIME` because multiple axis roots are computed with
/// accuracy `eps^(1/m)`.
pub const TOL_AXIS_CLUSTER: f64 = 1e-6;

/// Grid nonnegativity floor for spectral densities (absolute).
pub const TOL_NONNEG: f64 = 1e-12;

/// Relative residual allowed for a Lyapunov solve, against `‖Q‖`.
pub const TOL_LYAPUNOV: f64 = 1e-10;

/// Relative residual allowed for a Riccati solve, against `1 + ‖P‖`.
pub const TOL_RICCATI: f64 = 1e-9;

/// Allowed deviation of `|K(jλ)|` from one on the validation grid.
pub const TOL_INNER: f64 = 1e-9;

/// Stationarity residual `‖AΣ + ΣAᵀ‖` allowed for the bath invariant
/// covariance (absolute, the blocks are exact by construction).
pub const TOL_STATIONARITY: f64 = 1e-12;
