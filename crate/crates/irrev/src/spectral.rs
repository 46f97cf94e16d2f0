//! Rational power spectra read on the imaginary axis, their validation, and
//! spectral factorization: the scalar route roots even polynomials in `u = s²`
//! and mirrors roots into the left half-plane, the matrix route solves the
//! positive-real Riccati equation. Also the coanalytic mirror factor and the
//! spectral distribution function.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::validation_grid;
use crate::linalg::{self, MatrixDto};
use crate::polyrat::{Polynomial, RationalFunction};
use crate::quad::adaptive_simpson;
use crate::tol::{TOL_AXIS_CLUSTER, TOL_HURWITZ, TOL_NONNEG};

pub use crate::linalg::solve_are;

/// A rational power spectrum stored as a function of `s`; the density at
/// angular frequency `lambda` is the value at `s = j lambda`. Construction
/// does not validate, so ill-formed candidates can still be run through
/// `validate_density` and get a diagnosis instead of an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarSpectralDensity {
    pub tf: RationalFunction,
}

impl ScalarSpectralDensity {
    pub fn new(tf: RationalFunction) -> Self {
        ScalarSpectralDensity { tf }
    }

    /// Density value at angular frequency `lambda`.
    pub fn at(&self, lambda: f64) -> f64 {
        self.tf.eval(Complex64::new(0.0, lambda)).re
    }
}

/// One named validation check with its measured margin. The margin is signed
/// so a reader can see how close a failing input came.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

impl Diagnostic {
    pub fn new(name: &str, pass: bool, margin: f64) -> Self {
        Diagnostic {
            name: name.to_string(),
            pass,
            margin,
        }
    }
}

/// A bundle of diagnostics from a validator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Diagnostic>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Diagnostic> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Largest odd-power coefficient magnitude relative to the largest
/// coefficient overall; zero for an even polynomial.
fn odd_part_ratio(p: &Polynomial) -> f64 {
    let scale = p.coeffs().iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    p.coeffs()
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 1)
        .map(|(_, &c)| c.abs() / scale)
        .fold(0.0, f64::max)
}

/// Checks the four density invariants and reports each with its margin:
/// even parity in `s`, realness and nonnegativity on the validation grid,
/// pole distance from the imaginary axis, and properness.
pub fn validate_density(phi: &ScalarSpectralDensity) -> Report {
    let mut checks = Vec::new();
    let num = phi.tf.num();
    let den = phi.tf.den();

    let parity = odd_part_ratio(num).max(odd_part_ratio(den));
    checks.push(Diagnostic::new("even-parity", parity <= 1e-12, parity));

    let mut min_re = f64::INFINITY;
    let mut max_im = 0.0f64;
    for &lambda in &validation_grid() {
        let v = phi.tf.eval(Complex64::new(0.0, lambda));
        let scale = v.norm().max(1.0);
        min_re = min_re.min(v.re);
        max_im = max_im.max(v.im.abs() / scale);
    }
    let real_ok = max_im <= 1e-9;
    let nonneg_ok = min_re >= -TOL_NONNEG;
    checks.push(Diagnostic::new(
        "real-nonnegative-on-axis",
        real_ok && nonneg_ok && min_re.is_finite(),
        min_re,
    ));

    let axis_gap = match den.roots() {
        Ok(roots) => roots.iter().map(|r| r.re.abs()).fold(f64::INFINITY, f64::min),
        Err(_) => 0.0,
    };
    checks.push(Diagnostic::new(
        "no-imaginary-axis-poles",
        axis_gap > TOL_HURWITZ,
        axis_gap,
    ));

    let num_deg = num.degree().map(|d| d as i64).unwrap_or(i64::MIN);
    let den_deg = den.degree().map(|d| d as i64).unwrap_or(0);
    let slack = den_deg.saturating_sub(num_deg);
    checks.push(Diagnostic::new("proper", slack >= 0, slack as f64));

    Report { checks }
}

/// Which half-plane a factor's poles live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Analytic,
    Coanalytic,
}

/// One spectral factor: `|tf(j lambda)|²` reproduces the parent density.
/// Analytic factors have a Hurwitz denominator and minimum-phase numerator;
/// coanalytic factors mirror the poles into the right half-plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFactor {
    pub tf: RationalFunction,
    pub orientation: Orientation,
}

impl SpectralFactor {
    /// `|tf(j lambda)|²`.
    pub fn gain_squared(&self, lambda: f64) -> f64 {
        self.tf.abs2_on_axis(lambda)
    }
}

/// The even-power coefficients of `p` read as a polynomial in `u = s²`.
/// The caller is responsible for having checked parity first.
fn even_to_u(p: &Polynomial) -> Polynomial {
    let coeffs: Vec<f64> = p
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(_, &c)| c)
        .collect();
    Polynomial::new(coeffs)
}

/// True when a root of the `u = s²` polynomial corresponds to a point on the
/// imaginary axis of the `s` plane, i.e. `u` is real and nonpositive.
fn is_axis_u(u: Complex64, scale: f64) -> bool {
    u.im.abs() <= TOL_AXIS_CLUSTER * scale && u.re <= TOL_AXIS_CLUSTER * scale
}

/// Scalar spectral factorization by exact root mirroring. Roots the numerator
/// and denominator as polynomials in `u = s²`, keeps the left-half-plane
/// member of each `±√u` pair, splits imaginary-axis numerator roots evenly,
/// and rescales so the factor's squared modulus matches the density.
pub fn spectral_factor_scalar(phi: &ScalarSpectralDensity) -> Result<SpectralFactor> {
    if phi.tf.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let tf = phi.tf.reduced()?;
    let num = tf.num();
    let den = tf.den();
    if odd_part_ratio(num) > 1e-12 || odd_part_ratio(den) > 1e-12 {
        return Err(Error::NotNonnegative);
    }
    if !tf.is_proper() {
        return Err(Error::NotStrictlyProper);
    }

    let nu = even_to_u(num);
    let du = even_to_u(den);
    let p_half = nu.degree().unwrap();
    let q_half = du.degree().unwrap();

    let chi_roots: Vec<Complex64> = if q_half == 0 {
        Vec::new()
    } else {
        let u_roots = du.roots()?;
        let scale = root_scale(&u_roots);
        for &u in &u_roots {
            if is_axis_u(u, scale) {
                return Err(Error::AxisPole);
            }
        }
        u_roots.iter().map(|&u| -u.sqrt()).collect()
    };

    let mut eta_roots: Vec<Complex64> = Vec::with_capacity(p_half);
    if p_half > 0 {
        let u_roots = nu.roots()?;
        let scale = root_scale(&u_roots);
        let mut axis: Vec<f64> = Vec::new();
        for &u in &u_roots {
            if is_axis_u(u, scale) {
                axis.push(u.re.min(0.0));
            } else {
                eta_roots.push(-u.sqrt());
            }
        }
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut k = 0;
        while k < axis.len() {
            let mut j = k + 1;
            while j < axis.len() && (axis[j] - axis[k]).abs() <= 2.0 * TOL_AXIS_CLUSTER * scale {
                j += 1;
            }
            let m = j - k;
            let mean = axis[k..j].iter().sum::<f64>() / m as f64;
            let omega = (-mean).max(0.0).sqrt();
            if omega <= (TOL_AXIS_CLUSTER * scale).sqrt() {
                // Root cluster at the origin: the factor takes s^m.
                for _ in 0..m {
                    eta_roots.push(Complex64::new(0.0, 0.0));
                }
            } else {
                if m % 2 != 0 {
                    return Err(Error::NotNonnegative);
                }
                for _ in 0..m / 2 {
                    eta_roots.push(Complex64::new(0.0, omega));
                    eta_roots.push(Complex64::new(0.0, -omega));
                }
            }
            k = j;
        }
    }

    let a = nu.leading();
    let sign = if (p_half + q_half) % 2 == 1 { -1.0 } else { 1.0 };
    let c = a * sign;
    if c < 0.0 {
        return Err(Error::NotNonnegative);
    }

    let eta = Polynomial::from_roots(&eta_roots, 1.0)?;
    let chi = Polynomial::from_roots(&chi_roots, 1.0)?;
    let w = RationalFunction::new(eta.scale(c.sqrt()), chi)?;

    let worst = grid_factor_error(&w, phi);
    if worst > 1e-8 {
        return Err(Error::Numerical(format!(
            "factor misses the density by relative error {worst:.3e}"
        )));
    }
    Ok(SpectralFactor {
        tf: w,
        orientation: Orientation::Analytic,
    })
}

fn root_scale(roots: &[Complex64]) -> f64 {
    roots.iter().map(|r| r.norm()).fold(1.0, f64::max)
}

/// Max relative error of `|W(j lambda)|²` against the density on the grid.
fn grid_factor_error(w: &RationalFunction, phi: &ScalarSpectralDensity) -> f64 {
    validation_grid()
        .iter()
        .map(|&lambda| {
            let target = phi.at(lambda);
            let got = w.abs2_on_axis(lambda);
            (got - target).abs() / target.abs().max(1e-30)
        })
        .fold(0.0, f64::max)
}

/// The mirror factor `W̄(s) = ±N(s)/χ(-s)`: same modulus on the axis, poles
/// reflected into the right half-plane, sign normalized so the leading
/// coefficient ratio is positive.
pub fn coanalytic_factor(w: &SpectralFactor) -> SpectralFactor {
    let num = w.tf.num().clone();
    let den = w.tf.den().mirror();
    let tf = RationalFunction::new(num, den).expect("mirrored denominator stays nonzero");
    let tf = if tf.num().leading() < 0.0 {
        RationalFunction::new(tf.num().scale(-1.0), tf.den().clone())
            .expect("sign flip keeps the denominator")
    } else {
        tf
    };
    SpectralFactor {
        tf,
        orientation: match w.orientation {
            Orientation::Analytic => Orientation::Coanalytic,
            Orientation::Coanalytic => Orientation::Analytic,
        },
    }
}

/// Positive-real summand `Z(s) = J + H(sI-F)⁻¹G` of a matrix power spectrum
/// `Φ(s) = Z(s) + Z(-s)ᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixModelDto", into = "MatrixModelDto")]
pub struct MatrixSpectralModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub j: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixModelDto {
    #[serde(rename = "F")]
    f: MatrixDto,
    #[serde(rename = "G")]
    g: MatrixDto,
    #[serde(rename = "H")]
    h: MatrixDto,
    #[serde(rename = "J")]
    j: MatrixDto,
}

impl TryFrom<MatrixModelDto> for MatrixSpectralModel {
    type Error = Error;

    fn try_from(dto: MatrixModelDto) -> Result<Self> {
        MatrixSpectralModel::new(
            dto.f.to_matrix()?,
            dto.g.to_matrix()?,
            dto.h.to_matrix()?,
            dto.j.to_matrix()?,
        )
    }
}

impl From<MatrixSpectralModel> for MatrixModelDto {
    fn from(m: MatrixSpectralModel) -> Self {
        MatrixModelDto {
            f: MatrixDto::from_matrix(&m.f),
            g: MatrixDto::from_matrix(&m.g),
            h: MatrixDto::from_matrix(&m.h),
            j: MatrixDto::from_matrix(&m.j),
        }
    }
}

impl MatrixSpectralModel {
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        j: DMatrix<f64>,
    ) -> Result<Self> {
        let n = f.nrows();
        let m = j.nrows();
        if f.ncols() != n
            || g.nrows() != n
            || g.ncols() != m
            || h.nrows() != m
            || h.ncols() != n
            || j.ncols() != m
        {
            return Err(Error::dim(format!(
                "model blocks disagree: F {}x{}, G {}x{}, H {}x{}, J {}x{}",
                f.nrows(),
                f.ncols(),
                g.nrows(),
                g.ncols(),
                h.nrows(),
                h.ncols(),
                j.nrows(),
                j.ncols()
            )));
        }
        Ok(MatrixSpectralModel { f, g, h, j })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.j.nrows()
    }

    /// `Z(j lambda)`.
    pub fn z_at(&self, lambda: f64) -> Option<DMatrix<Complex64>> {
        linalg::transfer_at(
            &self.f,
            &self.g,
            &self.h,
            Some(&self.j),
            Complex64::new(0.0, lambda),
        )
    }

    /// The density `Φ(j lambda) = Z(j lambda) + Z(j lambda)*`.
    pub fn density_at(&self, lambda: f64) -> Option<DMatrix<Complex64>> {
        let z = self.z_at(lambda)?;
        Some(&z + z.adjoint())
    }
}

/// Checks the matrix-model invariants: Hurwitz `F`, positive definite
/// `J + Jᵀ`, and positive semidefinite density on the validation grid.
pub fn validate_matrix_model(model: &MatrixSpectralModel) -> Report {
    let mut checks = Vec::new();

    let gap = -linalg::spectral_abscissa(&model.f);
    checks.push(Diagnostic::new("f-hurwitz", gap > TOL_HURWITZ, gap));

    let r = &model.j + model.j.transpose();
    let r_pd = r.clone().cholesky().is_some();
    let r_margin = linalg::symmetrize(&r).symmetric_eigen().eigenvalues.min();
    checks.push(Diagnostic::new("r-positive-definite", r_pd, r_margin));

    let mut min_eig = f64::INFINITY;
    for &lambda in &validation_grid() {
        match model.density_at(lambda) {
            Some(phi) => {
                let herm = (&phi + phi.adjoint()) * Complex64::new(0.5, 0.0);
                let eigs = herm.symmetric_eigen().eigenvalues;
                min_eig = min_eig.min(eigs.min());
            }
            None => {
                min_eig = f64::NEG_INFINITY;
            }
        }
    }
    checks.push(Diagnostic::new(
        "density-psd-on-grid",
        min_eig >= -1e-10,
        min_eig,
    ));

    Report { checks }
}

/// State-space spectral factor `W(s) = D_w + H(sI-F)⁻¹B_w` with
/// `W(j lambda) W(j lambda)* = Φ(j lambda)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFactorDto", into = "MatrixFactorDto")]
pub struct MatrixSpectralFactor {
    pub f: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub d_w: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFactorDto {
    #[serde(rename = "F")]
    f: MatrixDto,
    #[serde(rename = "B_w")]
    b_w: MatrixDto,
    #[serde(rename = "H")]
    h: MatrixDto,
    #[serde(rename = "D_w")]
    d_w: MatrixDto,
}

impl TryFrom<MatrixFactorDto> for MatrixSpectralFactor {
    type Error = Error;

    fn try_from(dto: MatrixFactorDto) -> Result<Self> {
        Ok(MatrixSpectralFactor {
            f: dto.f.to_matrix()?,
            b_w: dto.b_w.to_matrix()?,
            h: dto.h.to_matrix()?,
            d_w: dto.d_w.to_matrix()?,
        })
    }
}

impl From<MatrixSpectralFactor> for MatrixFactorDto {
    fn from(m: MatrixSpectralFactor) -> Self {
        MatrixFactorDto {
            f: MatrixDto::from_matrix(&m.f),
            b_w: MatrixDto::from_matrix(&m.b_w),
            h: MatrixDto::from_matrix(&m.h),
            d_w: MatrixDto::from_matrix(&m.d_w),
        }
    }
}

impl MatrixSpectralFactor {
    /// `W(j lambda)`.
    pub fn at(&self, lambda: f64) -> Option<DMatrix<Complex64>> {
        linalg::transfer_at(
            &self.f,
            &self.b_w,
            &self.h,
            Some(&self.d_w),
            Complex64::new(0.0, lambda),
        )
    }
}

/// Matrix spectral factorization through the positive-real Riccati equation:
/// with `P` its stabilizing solution, `D_w = (J+Jᵀ)^{1/2}` and
/// `B_w = (G - P Hᵀ) D_w⁻¹` give the minimum-phase factor.
pub fn spectral_factor_matrix(model: &MatrixSpectralModel) -> Result<MatrixSpectralFactor> {
    let r = &model.j + model.j.transpose();
    if r.clone().cholesky().is_none() {
        return Err(Error::RSingular);
    }
    let p = solve_are(&model.f, &model.g, &model.h, &r)?;
    let d_w = linalg::sym_power(&r, 0.5)?;
    let d_w_inv = linalg::sym_power(&r, -0.5)?;
    let b_w = (&model.g - &p * model.h.transpose()) * d_w_inv;
    let factor = MatrixSpectralFactor {
        f: model.f.clone(),
        b_w,
        h: model.h.clone(),
        d_w,
    };

    let mut worst = 0.0f64;
    for &lambda in &validation_grid() {
        let w = factor
            .at(lambda)
            .ok_or_else(|| Error::Numerical("resolvent is singular on the grid".into()))?;
        let phi = model
            .density_at(lambda)
            .ok_or_else(|| Error::Numerical("resolvent is singular on the grid".into()))?;
        let err = (&w * w.adjoint() - &phi).norm() / phi.norm().max(1e-30);
        worst = worst.max(err);
    }
    if worst > 1e-7 {
        return Err(Error::Numerical(format!(
            "matrix factor misses the density by relative error {worst:.3e}"
        )));
    }
    Ok(factor)
}

/// The spectral distribution function `F(lambda) = ∫_{-∞}^{lambda} Φ(jμ) dμ`
/// with `F(-∞) = 0`, computed by adaptive quadrature after the substitution
/// `μ = tan θ`. A density that does not decay at infinity has no finite mass
/// and maps to `+∞`.
pub fn spectral_distribution(phi: &ScalarSpectralDensity, lambda: f64) -> f64 {
    if !phi.tf.is_strictly_proper() && !phi.tf.is_zero() {
        return f64::INFINITY;
    }
    if phi.tf.is_zero() {
        return 0.0;
    }
    let inset = 1e-10;
    let lo = -FRAC_PI_2 + inset;
    let hi = lambda.atan().min(FRAC_PI_2 - inset);
    if hi <= lo {
        return 0.0;
    }
    let tf = phi.tf.clone();
    adaptive_simpson(
        &|theta: f64| {
            let mu = theta.tan();
            let c = theta.cos();
            tf.eval(Complex64::new(0.0, mu)).re / (c * c)
        },
        lo,
        hi,
        1e-9,
    )
}

/// Total spectral mass `F(+∞)`.
pub fn spectral_mass(phi: &ScalarSpectralDensity) -> f64 {
    spectral_distribution(phi, f64::INFINITY)
}
