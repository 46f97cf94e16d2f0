//! Cayley correspondence between inner functions and lossless impedances,
//! Foster analysis and synthesis, and the state-space load realization that
//! the scattering simulator drives.
//!
//! A lossless impedance is a ratio of an even and an odd polynomial whose
//! poles all sit on the imaginary axis with positive residues. The Cayley
//! map `Z0 = (1 - K)/(1 + K)` carries the structural function of a
//! stationary pair onto such an impedance and back.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::linalg;
use crate::polyrat::{coprime_reduce, Polynomial, RationalFunction};
use crate::realization::{InnerFunction, StateSpaceModel};

/// A rational impedance satisfying the lossless (Foster) conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LosslessImpedance {
    pub tf: RationalFunction,
}

impl LosslessImpedance {
    pub fn at(&self, s: Complex64) -> Complex64 {
        self.tf.eval(s)
    }
}

/// Partial-fraction data of a lossless impedance:
/// `Z0(s) = k_inf s + k_0 / s + sum 2 k_i s / (s^2 + omega_i^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FosterForm {
    pub k_inf: f64,
    pub k_0: f64,
    pub pairs: Vec<(f64, f64)>,
}

impl FosterForm {
    /// Reassembles the rational impedance from the expansion terms.
    pub fn reconstruct(&self) -> RationalFunction {
        let mut total = RationalFunction::zero();
        if self.k_inf != 0.0 {
            let term = RationalFunction::new(
                Polynomial::new(vec![0.0, self.k_inf]),
                Polynomial::one(),
            )
            .expect("constant denominator");
            total = rat_add(&total, &term);
        }
        if self.k_0 != 0.0 {
            let term =
                RationalFunction::new(Polynomial::constant(self.k_0), Polynomial::s())
                    .expect("nonzero denominator");
            total = rat_add(&total, &term);
        }
        for &(k, omega) in &self.pairs {
            let term = RationalFunction::new(
                Polynomial::new(vec![0.0, 2.0 * k]),
                Polynomial::new(vec![omega * omega, 0.0, 1.0]),
            )
            .expect("nonzero denominator");
            total = rat_add(&total, &term);
        }
        total
    }
}

fn rat_add(a: &RationalFunction, b: &RationalFunction) -> RationalFunction {
    let num = a.num().mul(b.den()).add(&b.num().mul(a.den()));
    let den = a.den().mul(b.den());
    RationalFunction::new(num, den).expect("product of nonzero denominators")
}

/// Cayley image `Z0 = (1 - K)/(1 + K)` of an inner function, in reduced
/// terms. For a structural function with monic Hurwitz `chi` this is the
/// ratio of the odd and even parts of `chi`, computed without cancellation
/// error because the parities split coefficient-exactly.
pub fn k_to_z0(k: &InnerFunction) -> Result<LosslessImpedance> {
    let diff = k.tf.den().sub(k.tf.num());
    let sum = k.tf.den().add(k.tf.num());
    if sum.is_zero() {
        return Err(Error::KIsMinusOne);
    }
    let tf = coprime_reduce(&diff, &sum)?;
    Ok(LosslessImpedance { tf })
}

/// Inverse Cayley map `K = (1 - Z0)/(1 + Z0)`. The numerator of the result
/// is snapped onto the signed mirror of its denominator, which it must equal
/// for a genuine lossless input; a residual above `1e-9` relative, or a
/// non-Hurwitz denominator, rejects the input instead.
pub fn z0_to_k(z0: &LosslessImpedance) -> Result<InnerFunction> {
    let diff = z0.tf.den().sub(z0.tf.num());
    let sum = z0.tf.den().add(z0.tf.num());
    if sum.is_zero() {
        return Err(Error::Z0IsMinusOne);
    }
    let tf = coprime_reduce(&diff, &sum)?;
    let chi = tf.den().clone();
    if !chi.is_hurwitz() {
        return Err(Error::NotLossless);
    }
    let mirror = chi.mirror();
    let scale = chi.coeff_scale().max(f64::MIN_POSITIVE);
    let plus = tf.num().sub(&mirror).coeff_scale();
    let minus = tf.num().add(&mirror).coeff_scale();
    let sign = if plus <= minus { 1.0 } else { -1.0 };
    if plus.min(minus) > 1e-9 * scale {
        return Err(Error::NotLossless);
    }
    let tf = RationalFunction::new(mirror.scale(sign), chi)?;
    Ok(InnerFunction { tf, sign })
}

/// Foster-condition diagnostics for a candidate impedance. `residues` lists
/// `(omega, residue)` for every simple pole found on the nonnegative
/// imaginary axis; `axis_real_part` is the largest real part seen on the
/// validation grid away from poles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FosterReport {
    pub parity_ok: bool,
    pub axis_real_part: f64,
    pub residues: Vec<(f64, f64)>,
    pub interlacing_ok: bool,
}

impl FosterReport {
    pub fn is_lossless(&self) -> bool {
        self.parity_ok
            && self.axis_real_part <= 1e-9
            && self.interlacing_ok
            && self.residues.iter().all(|&(_, r)| r.is_finite() && r > 0.0)
    }
}

/// Nonnegative imaginary parts of the roots, one entry per conjugate pair,
/// or `None` when some root sits off the axis.
fn axis_ordinates(p: &Polynomial) -> Option<Vec<f64>> {
    let roots = p.roots().ok()?;
    let mut ordinates = Vec::new();
    for root in &roots {
        if root.re.abs() > 1e-6 * root.norm().max(1.0) {
            return None;
        }
        if root.im >= 0.0 {
            ordinates.push(root.im.abs());
        }
    }
    ordinates.sort_by(|a, b| a.total_cmp(b));
    Some(ordinates)
}

/// Checks the classical lossless conditions and reports each piece: the
/// even/odd parity split, the largest axis real part, the residues at the
/// axis poles, and strict pole/zero interlacing along the positive axis.
pub fn verify_foster(z0: &RationalFunction) -> FosterReport {
    let num = z0.num();
    let den = z0.den();

    let parity_ok = (num.is_even(1e-12) && den.is_odd(1e-12))
        || (num.is_odd(1e-12) && den.is_even(1e-12));

    let mut axis_real_part = 0.0f64;
    for &lambda in &grid::validation_grid() {
        let v = z0.eval(Complex64::new(0.0, lambda));
        if v.norm() <= 1e6 {
            axis_real_part = axis_real_part.max(v.re.abs());
        }
    }

    let mut residues = Vec::new();
    if let Some(pole_ords) = axis_ordinates(den) {
        let dden = den.derivative();
        for &omega in &pole_ords {
            let s = Complex64::new(0.0, omega);
            let slope = dden.eval(s);
            let r = if slope.norm() > 1e-9 * dden.coeff_scale().max(1.0) {
                (num.eval(s) / slope).re
            } else {
                f64::INFINITY
            };
            residues.push((omega, r));
        }
    }

    let interlacing_ok = if num.is_zero() {
        true
    } else {
        check_interlacing(num, den)
    };

    FosterReport {
        parity_ok,
        axis_real_part,
        residues,
        interlacing_ok,
    }
}

fn check_interlacing(num: &Polynomial, den: &Polynomial) -> bool {
    let (zeros, poles) = match (axis_ordinates(num), axis_ordinates(den)) {
        (Some(z), Some(p)) => (z, p),
        _ => return false,
    };
    let deg_gap = num.degree().unwrap_or(0) as i64 - den.degree().unwrap_or(0) as i64;
    if deg_gap.abs() != 1 {
        return false;
    }
    let mut merged: Vec<(f64, bool)> = zeros
        .iter()
        .map(|&w| (w, false))
        .chain(poles.iter().map(|&w| (w, true)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    for window in merged.windows(2) {
        let (w0, is_pole0) = window[0];
        let (w1, is_pole1) = window[1];
        if is_pole0 == is_pole1 || w1 - w0 <= 1e-9 {
            return false;
        }
    }
    true
}

/// Extracts the Foster expansion of a lossless impedance. Every extracted
/// coefficient must come out strictly positive and the reassembled function
/// must match the input on the validation grid within `1e-8` relative.
pub fn foster_synthesis(z0: &LosslessImpedance) -> Result<FosterForm> {
    let reduced = z0.tf.reduced()?;
    if reduced.is_zero() {
        return Ok(FosterForm {
            k_inf: 0.0,
            k_0: 0.0,
            pairs: Vec::new(),
        });
    }
    let report = verify_foster(&reduced);
    if !report.is_lossless() {
        return Err(Error::NotLossless);
    }
    let num = reduced.num();
    let den = reduced.den();

    let mut k_inf = 0.0;
    if num.degree() > den.degree() {
        k_inf = num.leading() / den.leading();
        if k_inf <= 0.0 {
            return Err(Error::NotLossless);
        }
    }
    let mut k_0 = 0.0;
    let mut pairs = Vec::new();
    for &(omega, residue) in &report.residues {
        if !(residue.is_finite() && residue > 0.0) {
            return Err(Error::NotLossless);
        }
        if omega <= 1e-9 {
            k_0 = residue;
        } else {
            pairs.push((residue, omega));
        }
    }
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let form = FosterForm { k_inf, k_0, pairs };

    let rebuilt = form.reconstruct();
    let mut worst = 0.0f64;
    for &lambda in &grid::validation_grid() {
        let s = Complex64::new(0.0, lambda);
        let want = reduced.eval(s);
        if want.norm() > 1e6 {
            continue;
        }
        let got = rebuilt.eval(s);
        worst = worst.max((got - want).norm() / want.norm().max(1.0));
    }
    if worst > 1e-8 {
        return Err(Error::Numerical(
            "Foster expansion does not reproduce the impedance on the grid".into(),
        ));
    }
    Ok(form)
}

/// Controller-canonical realization `{F0, G0, H0}` of a strictly proper
/// lossless impedance. The internal dynamics are conservative: every
/// eigenvalue of `F0` lies on the imaginary axis.
pub fn load_state_space(z0: &LosslessImpedance) -> Result<StateSpaceModel> {
    if !z0.tf.is_strictly_proper() {
        return Err(Error::NotStrictlyProper);
    }
    let den = z0.tf.den();
    let n = den.degree().unwrap_or(0);
    if z0.tf.is_zero() || n == 0 {
        return StateSpaceModel::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 1),
            DMatrix::zeros(1, 0),
            None,
        );
    }
    let mut f = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        f[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        f[(n - 1, j)] = -den.coeff(j);
    }
    let mut g = DMatrix::<f64>::zeros(n, 1);
    g[(n - 1, 0)] = 1.0;
    let mut h = DMatrix::<f64>::zeros(1, n);
    for j in 0..n {
        h[(0, j)] = z0.tf.num().coeff(j);
    }
    let model = StateSpaceModel::new(f, g, h, None)?;

    let eigs = linalg::eigenvalues(&model.f)?;
    let off_axis = eigs.iter().map(|e| e.re.abs()).fold(0.0f64, f64::max);
    if off_axis > 1e-8 {
        return Err(Error::Numerical(
            "load realization has eigenvalues off the imaginary axis".into(),
        ));
    }

    let den_scale = den.coeff_scale().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for &lambda in &grid::validation_grid() {
        let s = Complex64::new(0.0, lambda);
        if den.eval(s).norm() < 1e-3 * den_scale {
            continue;
        }
        let want = z0.tf.eval(s);
        let got = model
            .transfer_at(s)
            .ok_or_else(|| Error::Numerical("resolvent is singular on the grid".into()))?[(0, 0)];
        worst = worst.max((got - want).norm() / want.norm().max(1.0));
    }
    if worst > 1e-8 {
        return Err(Error::Numerical(
            "load realization does not reproduce the impedance on the grid".into(),
        ));
    }
    Ok(model)
}

/// Pointwise matrix Cayley transform `(I - K)(I + K)^{-1}` for a matrix
/// inner-function value. Returns `None` when `I + K` is singular.
pub fn cayley_impedance_at(k_value: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = k_value.nrows();
    if k_value.ncols() != n {
        return None;
    }
    let id = DMatrix::<Complex64>::identity(n, n);
    let plus = &id + k_value;
    let minus = &id - k_value;
    plus.lu().try_inverse().map(|inv| minus * inv)
}
