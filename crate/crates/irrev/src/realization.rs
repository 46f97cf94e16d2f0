//! Forward and backward state-space realizations of a stationary process,
//! their shared state covariance, and the structural inner function that
//! links the two white-noise representations.
//!
//! The forward model is `dx = F x dt + G dw`, `y = H x` with `F` Hurwitz.
//! The backward model keeps the same state and reads time in reverse:
//! `Fbar = -P F^T P^{-1}` where `P` solves `F P + P F^T + G G^T = 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::linalg::{self, expm, leverrier, spectral_abscissa, transfer_at, MatrixDto};
pub use crate::linalg::solve_lyapunov;
use crate::polyrat::{Polynomial, RationalFunction};
use crate::spectral::{Diagnostic, Report};
use crate::tol;

/// A linear state-space model. The feedthrough `d` is zero unless the model
/// represents a scattering or load map that needs one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceDto", into = "StateSpaceDto")]
pub struct StateSpaceModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        d: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(Error::dim("F must be square"));
        }
        if g.nrows() != n {
            return Err(Error::dim("G must have as many rows as F"));
        }
        if h.ncols() != n {
            return Err(Error::dim("H must have as many columns as F"));
        }
        let d = d.unwrap_or_else(|| DMatrix::zeros(h.nrows(), g.ncols()));
        if d.nrows() != h.nrows() || d.ncols() != g.ncols() {
            return Err(Error::dim("D must be output-by-noise sized"));
        }
        Ok(StateSpaceModel { f, g, h, d })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.h.nrows()
    }

    /// `H (sI - F)^{-1} G + D` at a complex point.
    pub fn transfer_at(&self, s: Complex64) -> Option<DMatrix<Complex64>> {
        transfer_at(&self.f, &self.g, &self.h, Some(&self.d), s)
    }

    /// Controllable and observable by the eigenvector test at every
    /// eigenvalue of `F`.
    pub fn is_minimal(&self) -> bool {
        linalg::pbh_controllable(&self.f, &self.g).unwrap_or(false)
            && linalg::pbh_observable(&self.f, &self.h).unwrap_or(false)
    }
}

#[derive(Serialize, Deserialize)]
struct StateSpaceDto {
    #[serde(rename = "F")]
    f: MatrixDto,
    #[serde(rename = "G")]
    g: MatrixDto,
    #[serde(rename = "H")]
    h: MatrixDto,
    #[serde(rename = "D", default)]
    d: Option<MatrixDto>,
}

impl TryFrom<StateSpaceDto> for StateSpaceModel {
    type Error = Error;

    fn try_from(dto: StateSpaceDto) -> Result<Self> {
        let d = dto.d.map(|m| m.to_matrix()).transpose()?;
        StateSpaceModel::new(dto.f.to_matrix()?, dto.g.to_matrix()?, dto.h.to_matrix()?, d)
    }
}

impl From<StateSpaceModel> for StateSpaceDto {
    fn from(m: StateSpaceModel) -> Self {
        StateSpaceDto {
            f: MatrixDto::from_matrix(&m.f),
            g: MatrixDto::from_matrix(&m.g),
            h: MatrixDto::from_matrix(&m.h),
            d: Some(MatrixDto::from_matrix(&m.d)),
        }
    }
}

/// Controller-canonical minimal realization of a scalar strictly proper
/// transfer function `W(s) = num/den`. The state dimension equals the
/// denominator degree, and coprimality of the input guarantees minimality.
pub fn minimal_realization(w: &RationalFunction) -> Result<StateSpaceModel> {
    if w.num().is_zero() {
        return Err(Error::NotCoprime);
    }
    if !w.is_coprime(tol::TOL_COPRIME)? {
        return Err(Error::NotCoprime);
    }
    if !w.is_strictly_proper() {
        return Err(Error::NotStrictlyProper);
    }
    let chi = w.den();
    let n = chi.degree().unwrap_or(0);
    let mut f = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        f[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        f[(n - 1, j)] = -chi.coeff(j);
    }
    let mut g = DMatrix::<f64>::zeros(n, 1);
    g[(n - 1, 0)] = 1.0;
    let mut h = DMatrix::<f64>::zeros(1, n);
    for j in 0..n {
        h[(0, j)] = w.num().coeff(j);
    }
    let model = StateSpaceModel::new(f, g, h, None)?;
    if !model.is_minimal() {
        return Err(Error::NotCoprime);
    }
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for &lambda in &grid::validation_grid() {
        let s = Complex64::new(0.0, lambda);
        let want = w.eval(s);
        let got = model
            .transfer_at(s)
            .ok_or_else(|| Error::Numerical("resolvent is singular on the grid".into()))?[(0, 0)];
        scale = scale.max(want.norm());
        worst = worst.max((got - want).norm());
    }
    if worst > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(
            "realization does not reproduce the transfer function on the grid".into(),
        ));
    }
    Ok(model)
}

/// A forward model, its stationary state covariance, and the backward model
/// written in the same state coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairDto", into = "PairDto")]
pub struct ForwardBackwardPair {
    pub forward: StateSpaceModel,
    pub p: DMatrix<f64>,
    pub backward: StateSpaceModel,
}

impl ForwardBackwardPair {
    pub fn state_dim(&self) -> usize {
        self.forward.state_dim()
    }
}

#[derive(Serialize, Deserialize)]
struct PairDto {
    #[serde(rename = "F")]
    f: MatrixDto,
    #[serde(rename = "G")]
    g: MatrixDto,
    #[serde(rename = "H")]
    h: MatrixDto,
    #[serde(rename = "P")]
    p: MatrixDto,
    #[serde(rename = "Fbar")]
    fbar: MatrixDto,
    #[serde(rename = "Gbar")]
    gbar: MatrixDto,
    #[serde(rename = "Hbar")]
    hbar: MatrixDto,
}

impl TryFrom<PairDto> for ForwardBackwardPair {
    type Error = Error;

    fn try_from(dto: PairDto) -> Result<Self> {
        let forward =
            StateSpaceModel::new(dto.f.to_matrix()?, dto.g.to_matrix()?, dto.h.to_matrix()?, None)?;
        let backward = StateSpaceModel::new(
            dto.fbar.to_matrix()?,
            dto.gbar.to_matrix()?,
            dto.hbar.to_matrix()?,
            None,
        )?;
        let p = dto.p.to_matrix()?;
        if p.nrows() != forward.state_dim() || p.ncols() != forward.state_dim() {
            return Err(Error::dim("P must be state-by-state sized"));
        }
        if backward.state_dim() != forward.state_dim() {
            return Err(Error::dim("forward and backward state dimensions differ"));
        }
        Ok(ForwardBackwardPair { forward, p, backward })
    }
}

impl From<ForwardBackwardPair> for PairDto {
    fn from(pair: ForwardBackwardPair) -> Self {
        PairDto {
            f: MatrixDto::from_matrix(&pair.forward.f),
            g: MatrixDto::from_matrix(&pair.forward.g),
            h: MatrixDto::from_matrix(&pair.forward.h),
            p: MatrixDto::from_matrix(&pair.p),
            fbar: MatrixDto::from_matrix(&pair.backward.f),
            gbar: MatrixDto::from_matrix(&pair.backward.g),
            hbar: MatrixDto::from_matrix(&pair.backward.h),
        }
    }
}

/// Solves for the stationary covariance and forms the backward generator
/// `Fbar = -P F^T P^{-1}`. Noise gain and output map carry over unchanged.
pub fn build_pair(forward: &StateSpaceModel) -> Result<ForwardBackwardPair> {
    let q = &forward.g * forward.g.transpose();
    let p = solve_lyapunov(&forward.f, &q)?;
    let chol = p.clone().cholesky().ok_or(Error::PSingular)?;
    let b = -(&p * forward.f.transpose());
    let fbar = chol.solve(&b.transpose()).transpose();
    let backward =
        StateSpaceModel::new(fbar, forward.g.clone(), forward.h.clone(), None)?;
    Ok(ForwardBackwardPair {
        forward: forward.clone(),
        p,
        backward,
    })
}

/// Largest distance from an eigenvalue of `Fbar` to its nearest unclaimed
/// partner in the mirrored spectrum `-eig(F)`.
pub fn spectrum_mirror_distance(f: &DMatrix<f64>, fbar: &DMatrix<f64>) -> Result<f64> {
    let mirrored: Vec<Complex64> = linalg::eigenvalues(f)?.iter().map(|e| -e).collect();
    let spectrum = linalg::eigenvalues(fbar)?;
    Ok(greedy_match_distance(&spectrum, &mirrored))
}

fn greedy_match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for &x in a {
        let mut best: Option<(usize, f64)> = None;
        for (j, &y) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (x - y).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            used[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Checks the defining identities of a forward/backward pair and reports
/// each with its measured margin:
/// the forward generator is Hurwitz, `P` solves the Lyapunov equation,
/// the backward spectrum mirrors the forward one, both models share `G`
/// and `H`, and `e^{F tau} P = P e^{-Fbar^T tau}` on a few lags.
pub fn validate_pair(pair: &ForwardBackwardPair) -> Report {
    let f = &pair.forward.f;
    let g = &pair.forward.g;
    let h = &pair.forward.h;
    let p = &pair.p;
    let mut checks = Vec::new();

    let abscissa = spectral_abscissa(f);
    checks.push(Diagnostic::new(
        "forward-hurwitz",
        abscissa < -tol::TOL_HURWITZ,
        -abscissa,
    ));

    let q = g * g.transpose();
    let residual = (f * p + p * f.transpose() + &q).norm();
    let rel = residual / q.norm().max(f64::MIN_POSITIVE);
    checks.push(Diagnostic::new("lyapunov-residual", rel <= 1e-9, rel));

    let mirror = spectrum_mirror_distance(f, &pair.backward.f).unwrap_or(f64::INFINITY);
    checks.push(Diagnostic::new("spectrum-mirror", mirror <= 1e-8, mirror));

    let shared = (&pair.backward.g * pair.backward.g.transpose() - &q).norm()
        + (&pair.backward.h - h).norm();
    checks.push(Diagnostic::new("shared-noise-and-output", shared <= 1e-12, shared));

    let mut intertwine = 0.0f64;
    for tau in [0.1, 1.0, 3.0] {
        let lhs = expm(&(f * tau)) * p;
        let rhs = p * expm(&(pair.backward.f.transpose() * -tau));
        intertwine = intertwine.max((lhs - rhs).norm());
    }
    checks.push(Diagnostic::new("exp-intertwine", intertwine <= 1e-9, intertwine));

    Report { checks }
}

/// An all-pass function of the form `K(s) = sign * chi(-s) / chi(s)` with
/// `chi` Hurwitz and monic. The stored numerator already includes the sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerFunction {
    pub tf: RationalFunction,
    pub sign: f64,
}

impl InnerFunction {
    pub fn at(&self, s: Complex64) -> Complex64 {
        self.tf.eval(s)
    }

    /// The Hurwitz denominator polynomial.
    pub fn char_poly(&self) -> &Polynomial {
        self.tf.den()
    }

    pub fn order(&self) -> usize {
        self.tf.den().degree().unwrap_or(0)
    }
}

/// Builds `K(s) = sign * chi(-s)/chi(s)` from a Hurwitz polynomial. The sign
/// is `(-1)^n`, which is exactly the choice that makes the Cayley image
/// `Z0 = (1 - K)/(1 + K)` strictly proper.
pub fn inner_from_char_poly(chi: &Polynomial) -> Result<InnerFunction> {
    let chi = chi.monic()?;
    if !chi.is_hurwitz() {
        return Err(Error::NotHurwitz);
    }
    let n = chi.degree().unwrap_or(0);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let num = chi.mirror().scale(sign);
    let diff = chi.sub(&num);
    let sum = chi.add(&num);
    if diff.degree() >= sum.degree() {
        return Err(Error::Numerical(
            "sign normalization failed to make the Cayley image strictly proper".into(),
        ));
    }
    let tf = RationalFunction::new(num, chi)?;
    Ok(InnerFunction { tf, sign })
}

/// Checks that an inner function has the structural form: unit modulus on
/// the imaginary axis, Hurwitz denominator, a numerator that is the signed
/// mirror of the denominator, and a strictly proper Cayley image.
pub fn validate_inner(k: &InnerFunction) -> Report {
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for &lambda in &grid::validation_grid() {
        let m = k.at(Complex64::new(0.0, lambda)).norm();
        worst = worst.max((m - 1.0).abs());
    }
    checks.push(Diagnostic::new(
        "unimodular-on-axis",
        worst <= tol::TOL_INNER,
        worst,
    ));

    checks.push(Diagnostic::new(
        "denominator-hurwitz",
        k.tf.den().is_hurwitz(),
        0.0,
    ));

    let mirror = k.tf.den().mirror().scale(k.sign);
    let scale = k.tf.den().coeff_scale().max(f64::MIN_POSITIVE);
    let coeff_dev = k.tf.num().sub(&mirror).coeff_scale() / scale;
    checks.push(Diagnostic::new(
        "numerator-is-signed-mirror",
        coeff_dev <= 1e-12,
        coeff_dev,
    ));

    let diff = k.tf.den().sub(k.tf.num());
    let sum = k.tf.den().add(k.tf.num());
    checks.push(Diagnostic::new(
        "cayley-image-strictly-proper",
        diff.degree() < sum.degree(),
        0.0,
    ));

    Report { checks }
}

/// The structural inner function of a scalar pair, built from the
/// characteristic polynomial of the forward generator. The quotient
/// `Wbar(s)^{-1} W(s)` of backward and forward factors is recomputed on the
/// validation grid and must agree with `K` up to one unimodular constant.
pub fn structural_function(pair: &ForwardBackwardPair) -> Result<InnerFunction> {
    if pair.forward.output_dim() != 1 || pair.forward.noise_dim() != 1 {
        return Err(Error::dim(
            "rational structural function needs a scalar model; use structural_function_matrix",
        ));
    }
    let (chi, _) = leverrier(&pair.forward.f);
    let k = inner_from_char_poly(&chi)?;

    let lambdas = grid::validation_grid();
    let mut samples = Vec::with_capacity(lambdas.len());
    let mut wbar_scale = 0.0f64;
    for &lambda in &lambdas {
        let s = Complex64::new(0.0, lambda);
        let w = pair.forward.transfer_at(s);
        let wbar = pair.backward.transfer_at(s);
        if let (Some(w), Some(wbar)) = (w, wbar) {
            let (w, wbar) = (w[(0, 0)], wbar[(0, 0)]);
            wbar_scale = wbar_scale.max(wbar.norm());
            samples.push((s, w, wbar));
        }
    }
    let mut anchor: Option<(Complex64, f64)> = None;
    for &(s, w, wbar) in &samples {
        if wbar.norm() > 1e-8 * wbar_scale {
            let c = (w / wbar) / k.at(s);
            if anchor.is_none_or(|(_, best)| wbar.norm() > best) {
                anchor = Some((c, wbar.norm()));
            }
        }
    }
    let (c, _) = anchor.ok_or_else(|| {
        Error::Numerical("backward factor vanishes on the whole validation grid".into())
    })?;
    if (c.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::Numerical(
            "factor quotient differs from the structural function by a non-unimodular constant"
                .into(),
        ));
    }
    let mut dev = 0.0f64;
    for &(s, w, wbar) in &samples {
        if wbar.norm() > 1e-8 * wbar_scale {
            dev = dev.max((w / wbar - c * k.at(s)).norm());
        }
    }
    if dev > 1e-7 {
        return Err(Error::Numerical(
            "factor quotient disagrees with the structural function on the grid".into(),
        ));
    }
    Ok(k)
}

/// Matrix-noise form of the structural function: the state-space model
/// `{F, G, -G^T P^{-1}, I}` whose transfer matrix
/// `K(s) = I - G^T P^{-1} (sI - F)^{-1} G` is inner.
pub fn structural_function_matrix(pair: &ForwardBackwardPair) -> Result<StateSpaceModel> {
    let chol = pair.p.clone().cholesky().ok_or(Error::PSingular)?;
    let c = -chol.solve(&pair.forward.g).transpose();
    let d = DMatrix::<f64>::identity(pair.forward.noise_dim(), pair.forward.noise_dim());
    StateSpaceModel::new(pair.forward.f.clone(), pair.forward.g.clone(), c, Some(d))
}

/// Result of pushing an output functional through the structural function.
#[derive(Clone, Debug)]
pub struct InvarianceOutcome {
    pub t: RationalFunction,
    pub t_bar: RationalFunction,
    pub report: Report,
}

/// Maps the scalar output functional `T(s) = C (sI - F)^{-1} G + D` across
/// the structural function, forming `Tbar = T * K^{-1}` in reduced terms,
/// and reports whether `Tbar` is co-analytic (all poles in the closed right
/// half-plane) with `|Tbar| = |T|` along the imaginary axis.
pub fn invariance_check(
    pair: &ForwardBackwardPair,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<InvarianceOutcome> {
    let n = pair.state_dim();
    if pair.forward.noise_dim() != 1 {
        return Err(Error::dim("invariance check needs a scalar-noise model"));
    }
    if c.nrows() != 1 || c.ncols() != n || d.nrows() != 1 || d.ncols() != 1 {
        return Err(Error::dim("C must be 1 x n and D must be 1 x 1"));
    }
    let (chi, adj) = leverrier(&pair.forward.f);
    let mut num = chi.scale(d[(0, 0)]);
    for (k, b) in adj.iter().enumerate() {
        let coef = (c * b * &pair.forward.g)[(0, 0)];
        let mut mono = vec![0.0; k + 1];
        mono[k] = coef;
        num = num.add(&Polynomial::new(mono));
    }
    if num.is_zero() {
        return Err(Error::DegenerateOutput);
    }
    let t = RationalFunction::new(num, chi)?;
    let k = structural_function(pair)?;
    let t_bar = t.mul(&k.tf.inv()?)?.reduced()?;

    let mut checks = Vec::new();
    let poles = t_bar.den().roots()?;
    let min_re = poles.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
    checks.push(Diagnostic::new("coanalytic", min_re >= -1e-6, min_re));

    let mut scale = 0.0f64;
    let mut dev = 0.0f64;
    for &lambda in &grid::validation_grid() {
        let s = Complex64::new(0.0, lambda);
        let t_mod = t.eval(s).norm();
        scale = scale.max(t_mod);
        dev = dev.max((t_bar.eval(s).norm() - t_mod).abs());
    }
    let rel = dev / scale.max(f64::MIN_POSITIVE);
    checks.push(Diagnostic::new("modulus-preserved", rel <= 1e-7, rel));

    Ok(InvarianceOutcome {
        t,
        t_bar,
        report: Report { checks },
    })
}

/// Stationary covariance `Lambda(tau) = H e^{F tau} P H^T` for `tau >= 0`.
/// Negative lags follow from `Lambda(-tau) = Lambda(tau)^T`.
pub fn covariance_function(pair: &ForwardBackwardPair, tau: f64) -> Result<DMatrix<f64>> {
    if !tau.is_finite() {
        return Err(Error::InvalidArgument("lag must be finite".into()));
    }
    if tau < 0.0 {
        return Err(Error::NegativeLag);
    }
    let e = expm(&(&pair.forward.f * tau));
    Ok(&pair.forward.h * e * &pair.p * pair.forward.h.transpose())
}
