//! Dense linear-algebra workhorses shared by the model-building modules:
//! matrix exponential, exact discretization integrals, Lyapunov and Riccati
//! solvers, the Faddeev-LeVerrier recursion, and a few symmetric-matrix
//! helpers. Dimensions in this crate are small (state orders rarely beyond a
//! few dozen), so clarity and verifiable residuals win over asymptotics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyrat::Polynomial;
use crate::tol::{TOL_HURWITZ, TOL_LYAPUNOV, TOL_RICCATI};

/// Scaling-and-squaring matrix exponential with degree-13 Pade approximant,
/// falling back to lower degrees for small norms.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    const THETA3: f64 = 1.495585217958292e-2;
    const THETA5: f64 = 2.53939833006323e-1;
    const THETA7: f64 = 9.504178996162932e-1;
    const THETA9: f64 = 2.097847961257068;
    const THETA13: f64 = 5.371920351148152;

    if norm <= THETA3 {
        return pade_low(a, &[120.0, 60.0, 12.0, 1.0]);
    }
    if norm <= THETA5 {
        return pade_low(a, &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]);
    }
    if norm <= THETA7 {
        return pade_low(
            a,
            &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        );
    }
    if norm <= THETA9 {
        return pade_low(
            a,
            &[
                17643225600.0,
                8821612800.0,
                2075673600.0,
                302702400.0,
                30270240.0,
                2162160.0,
                110880.0,
                3960.0,
                90.0,
                1.0,
            ],
        );
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as u32;
    let scaled = a * 2f64.powi(-(s as i32));
    let mut e = pade13(&scaled);
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Pade approximant for odd degree <= 9 given its coefficient table.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    // Powers of a2 up to (degree-1)/2.
    let mut even_pows = vec![id.clone()];
    while even_pows.len() < b.len() / 2 {
        let next = even_pows.last().unwrap() * &a2;
        even_pows.push(next);
    }
    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for (k, pow) in even_pows.iter().enumerate() {
        u_inner += pow * b[2 * k + 1];
        v += pow * b[2 * k];
    }
    let u = a * u_inner;
    solve_pade(u, v)
}

fn pade13(a: &DMatrix<f64>) -> DMatrix<f64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = a * (&a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &id * B[1]);
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &id * B[0];
    solve_pade(u, v)
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let lhs = &v - &u;
    let rhs = &v + &u;
    lhs.lu()
        .solve(&rhs)
        .expect("Pade denominator is nonsingular for norms below the theta cutoffs")
}

/// Exact zero-order-hold discretization: returns `(e^{Ah}, int_0^h e^{At} dt B)`.
pub fn integrate_exp(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * h));
    let e = expm(&aug);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Exact discrete-time noise covariance over one step:
/// `(e^{Ah}, int_0^h e^{At} Q e^{A^T t} dt)` via the block-exponential identity.
pub fn van_loan(a: &DMatrix<f64>, q: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, n)).copy_from(&(q * h));
    aug.view_mut((n, n), (n, n)).copy_from(&(-a.transpose() * h));
    let e = expm(&aug);
    let ad = e.view((0, 0), (n, n)).into_owned();
    let qd = e.view((0, n), (n, n)).into_owned() * ad.transpose();
    (ad, symmetrize(&qd))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues via a bounded-iteration Schur decomposition. Unbounded
/// shifted-QR can stall on defective spectra, so a refusal falls back to
/// rooting the characteristic polynomial, which is fine at these orders.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    if let Some(schur) = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 50 * m.nrows().max(20))
    {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    let (chi, _) = leverrier(m);
    chi.roots()
}

/// Max real part over the spectrum; `+inf` when the spectrum is unobtainable,
/// so stability checks fail closed.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    match eigenvalues(m) {
        Ok(eigs) => eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::INFINITY,
    }
}

pub fn is_hurwitz_matrix(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || spectral_abscissa(m) < -TOL_HURWITZ
}

/// Solves `F X + X F^T + Q = 0` for Hurwitz `F` through the Kronecker normal
/// equations, with one refinement pass. Residual is held to
/// `TOL_LYAPUNOV * ||Q||`.
pub fn solve_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_hurwitz_matrix(f) {
        return Err(Error::NotHurwitz);
    }
    solve_lyapunov_unchecked(f, q)
}

/// Same as `solve_lyapunov` but trusts the caller that the spectra of `F` and
/// `-F` are disjoint (used with closed-loop matrices already known stable).
fn solve_lyapunov_unchecked(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = solve_sylvester_kron(f, q)?;
    let qn = q.norm();
    for _ in 0..2 {
        let resid = f * &x + &x * f.transpose() + q;
        if resid.norm() <= TOL_LYAPUNOV * qn.max(1e-300) {
            break;
        }
        x += solve_sylvester_kron(f, &resid)?;
        x = symmetrize(&x);
    }
    Ok(symmetrize(&x))
}

/// One exact Kronecker solve of `F X + X F^T = -Q`.
fn solve_sylvester_kron(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::dim(format!(
            "Lyapunov right-hand side is {}x{}, expected {}x{}",
            q.nrows(),
            q.ncols(),
            n,
            n
        )));
    }
    let nn = n * n;
    let mut big = DMatrix::<f64>::zeros(nn, nn);
    // Column-stacked vec: entry (i, j) lives at index j*n + i.
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += f[(i, k)];
                big[(row, k * n + i)] += f[(j, k)];
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(nn);
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = -q[(i, j)];
        }
    }
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Lyapunov operator is singular".into()))?;
    Ok(DMatrix::from_fn(n, n, |i, j| sol[j * n + i]))
}

/// Newton iteration for the matrix sign function with determinant scaling.
/// Fails when the matrix has eigenvalues on (or numerically at) the imaginary
/// axis, which is exactly the no-dichotomy case callers must reject.
pub fn matrix_sign(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut z = m.clone();
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det: f64 = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return Err(Error::NoStabilizingSolution);
        }
        let z_inv = lu
            .try_inverse()
            .ok_or(Error::NoStabilizingSolution)?;
        let c = det.abs().powf(-1.0 / n as f64);
        let next = (&z * c + z_inv / c) * 0.5;
        let step = (&next - &z).norm();
        z = next;
        if step <= 1e-12 * z.norm().max(1.0) {
            // Two plain Newton touch-ups once the scaled iteration settles.
            for _ in 0..2 {
                let z_inv = z
                    .clone()
                    .lu()
                    .try_inverse()
                    .ok_or(Error::NoStabilizingSolution)?;
                z = (&z + z_inv) * 0.5;
            }
            return Ok(z);
        }
    }
    Err(Error::NoStabilizingSolution)
}

/// Stabilizing solution of
/// `F P + P F^T + (G - P H^T) R^{-1} (G - P H^T)^T = 0`.
///
/// The stable invariant subspace of the associated Hamiltonian matrix is
/// extracted with the matrix sign function, then the solution is polished by
/// Newton steps (each one a small Lyapunov solve) until the residual is below
/// `TOL_RICCATI * (1 + ||P||)`. Errors: `RSingular` when `R` is not symmetric
/// positive definite, `NoStabilizingSolution` when the spectrum has no
/// stable/antistable dichotomy or the closed loop fails to come out Hurwitz.
pub fn solve_are(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let m = r.nrows();
    if f.ncols() != n || g.nrows() != n || g.ncols() != m || h.nrows() != m || h.ncols() != n || r.ncols() != m
    {
        return Err(Error::dim("Riccati data dimensions are inconsistent"));
    }
    if (r - r.transpose()).norm() > 1e-9 * r.norm().max(1.0) {
        return Err(Error::RSingular);
    }
    let r_chol = r.clone().cholesky().ok_or(Error::RSingular)?;
    let r_inv = r_chol.inverse();

    let a_tilde = f - g * &r_inv * h;
    let s = h.transpose() * &r_inv * h;
    let q = g * &r_inv * g.transpose();

    let mut ham = DMatrix::<f64>::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(&a_tilde.transpose());
    ham.view_mut((0, n), (n, n)).copy_from(&s);
    ham.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-&a_tilde));

    let sign = matrix_sign(&ham)?;
    let projector = (DMatrix::<f64>::identity(2 * n, 2 * n) - sign) * 0.5;
    let svd = projector.svd(true, false);
    let u = svd.u.as_ref().expect("requested U factor");
    let sv = &svd.singular_values;
    if n > 0 && (sv[n - 1] < 0.5 || (2 * n > n && sv.len() > n && sv[n] > 0.5)) {
        return Err(Error::NoStabilizingSolution);
    }
    let basis = u.columns(0, n).into_owned();
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    let p_t = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or(Error::NoStabilizingSolution)?;
    let mut p = symmetrize(&p_t.transpose());

    // Newton polish: linearize at P and correct with a Lyapunov solve.
    for _ in 0..25 {
        let resid = &a_tilde * &p + &p * a_tilde.transpose() + &p * &s * &p + &q;
        if resid.norm() <= TOL_RICCATI * (1.0 + p.norm()) {
            break;
        }
        let a_cl = &a_tilde + &p * &s;
        let delta = solve_sylvester_kron(&a_cl, &resid)?;
        p = symmetrize(&(&p + delta));
    }

    let resid = &a_tilde * &p + &p * a_tilde.transpose() + &p * &s * &p + &q;
    if resid.norm() > TOL_RICCATI * (1.0 + p.norm()) {
        return Err(Error::Numerical(
            "Riccati residual failed to converge".into(),
        ));
    }
    let closed = f - (g - &p * h.transpose()) * &r_inv * h;
    if spectral_abscissa(&closed) >= -1e-12 * (1.0 + closed.norm()) {
        return Err(Error::NoStabilizingSolution);
    }
    Ok(p)
}

/// Faddeev-LeVerrier recursion. Returns the monic characteristic polynomial
/// (ascending coefficients) and the matrix coefficients `B_k` of
/// `adj(sI - F) = sum_k B_k s^k`, `k = 0..n-1`.
pub fn leverrier(f: &DMatrix<f64>) -> (Polynomial, Vec<DMatrix<f64>>) {
    let n = f.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut adj = vec![DMatrix::<f64>::zeros(n, n); n];
    let mut m = id.clone();
    for k in 1..=n {
        adj[n - k] = m.clone();
        let fm = f * &m;
        let c = -fm.trace() / k as f64;
        coeffs[n - k] = c;
        m = fm + &id * c;
    }
    (Polynomial::new(coeffs), adj)
}

/// Characteristic polynomial from eigenvalues (monic). More accurate than the
/// recursion when the spectrum is what you will consume anyway.
pub fn char_poly(f: &DMatrix<f64>) -> Result<Polynomial> {
    if f.nrows() == 0 {
        return Ok(Polynomial::one());
    }
    Polynomial::from_roots(&eigenvalues(f)?, 1.0)
}

/// `(sI - F)^{-1}` at a complex point.
pub fn resolvent(f: &DMatrix<f64>, s: Complex64) -> Option<DMatrix<Complex64>> {
    let n = f.nrows();
    let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(f[(i, j)], 0.0)
    });
    m.lu().try_inverse()
}

/// `H (sI - F)^{-1} G + D` at a complex point.
pub fn transfer_at(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    d: Option<&DMatrix<f64>>,
    s: Complex64,
) -> Option<DMatrix<Complex64>> {
    let res = resolvent(f, s)?;
    let gc = complexify(g);
    let hc = complexify(h);
    let mut t = hc * res * gc;
    if let Some(d) = d {
        for i in 0..t.nrows() {
            for j in 0..t.ncols() {
                t[(i, j)] += d[(i, j)];
            }
        }
    }
    Some(t)
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Fractional symmetric power through the eigendecomposition. Requires the
/// matrix to be symmetric positive definite for negative or fractional powers.
pub fn sym_power(m: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    if (m - m.transpose()).norm() > 1e-9 * m.norm().max(1.0) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let needs_pd = power < 0.0 || power.fract() != 0.0;
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if needs_pd && lambda <= 0.0 {
            return Err(Error::InvalidArgument(
                "matrix is not positive definite".into(),
            ));
        }
        let w = lambda.powf(power);
        for i in 0..scaled.nrows() {
            scaled[(i, k)] *= w;
        }
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// A factor `L` with `L L^T = clamp(M)`, where tiny negative eigenvalues from
/// roundoff are clamped to zero. For drawing noise with covariance `M`.
pub fn psd_factor_clamped(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let w = lambda.max(0.0).sqrt();
        for i in 0..l.nrows() {
            l[(i, k)] *= w;
        }
    }
    l
}

/// Numerical rank of the controllability matrix `[G, FG, ..., F^{n-1}G]`.
pub fn controllability_rank(f: &DMatrix<f64>, g: &DMatrix<f64>) -> usize {
    let n = f.nrows();
    let r = g.ncols();
    let mut blocks = DMatrix::<f64>::zeros(n, n * r);
    let mut cur = g.clone();
    for k in 0..n {
        blocks.view_mut((0, k * r), (n, r)).copy_from(&cur);
        cur = f * cur;
    }
    // Powers of F spread the column magnitudes across many decades, which
    // would swamp the relative rank threshold; rescaling columns leaves the
    // rank unchanged.
    for mut col in blocks.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    numerical_rank(&blocks, 1e-8)
}

pub fn observability_rank(f: &DMatrix<f64>, h: &DMatrix<f64>) -> usize {
    controllability_rank(&f.transpose(), &h.transpose())
}

/// Eigenvector test for controllability: `[F - lambda I, G]` keeps full row
/// rank at every eigenvalue of `F`. Unlike the stacked Krylov matrix, the
/// test stays well conditioned at high state dimension, where the margin it
/// measures is the distance to an actual pole/zero cancellation.
pub fn pbh_controllable(f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<bool> {
    pbh_observable(&f.transpose(), &g.transpose())
}

/// Eigenvector test for observability: `[F - lambda I; H]` keeps full column
/// rank at every eigenvalue of `F`.
pub fn pbh_observable(f: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<bool> {
    let n = f.nrows();
    if n == 0 {
        return Ok(true);
    }
    let m = h.nrows();
    let scale = f.norm().max(h.norm()).max(1.0);
    for lambda in eigenvalues(f)? {
        let mut stacked = DMatrix::<Complex64>::zeros(n + m, n);
        for i in 0..n {
            for j in 0..n {
                stacked[(i, j)] = Complex64::new(f[(i, j)], 0.0);
            }
            stacked[(i, i)] -= lambda;
        }
        for i in 0..m {
            for j in 0..n {
                stacked[(n + i, j)] = Complex64::new(h[(i, j)], 0.0);
            }
        }
        let sv = stacked.svd(false, false).singular_values;
        let smallest = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if smallest <= 1e-8 * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Row-major dense matrix exchange format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixDto {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixDto {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixDto {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::dim(format!(
                "matrix payload holds {} entries for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.data[i * self.cols + j]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::synth;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_relative_eq!(expm(&z), DMatrix::<f64>::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn expm_rotation_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        for &t in &[0.1, 1.0, 7.3] {
            let e = expm(&(&a * t));
            assert_relative_eq!(e[(0, 0)], t.cos(), epsilon = 1e-12);
            assert_relative_eq!(e[(0, 1)], t.sin(), epsilon = 1e-12);
            assert_relative_eq!(e[(1, 0)], -t.sin(), epsilon = 1e-12);
            assert_relative_eq!(e[(1, 1)], t.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn expm_nilpotent() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&a);
        assert_relative_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn expm_inverse_property_past_the_scaling_threshold() {
        let mut rng = crate::rng::stream(3, 0);
        for _ in 0..5 {
            let a = synth::random_matrix(&mut rng, 5, 2.0);
            assert!(one_norm(&a) > 5.4, "draw too small to exercise squaring");
            let prod = expm(&a) * expm(&(-&a));
            let scale = expm(&a).norm();
            assert!((prod - DMatrix::<f64>::identity(5, 5)).norm() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn integrate_exp_matches_closed_forms() {
        let a = DMatrix::<f64>::zeros(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let (ad, bd) = integrate_exp(&a, &b, 0.5);
        assert_relative_eq!(ad, DMatrix::<f64>::identity(2, 2), epsilon = 1e-14);
        assert_relative_eq!(bd, &b * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn van_loan_agrees_with_the_scalar_formula() {
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let q = DMatrix::from_row_slice(1, 1, &[2.0]);
        for &h in &[1e-3, 0.1, 1.0] {
            let (ad, qd) = van_loan(&a, &q, h);
            assert_relative_eq!(ad[(0, 0)], (-h).exp(), epsilon = 1e-13);
            assert_relative_eq!(qd[(0, 0)], 1.0 - (-2.0 * h).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn lyapunov_scalar_example() {
        let f = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let q = DMatrix::from_row_slice(1, 1, &[2.0]);
        let p = solve_lyapunov(&f, &q).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_residual_on_random_stable_systems() {
        let mut rng = crate::rng::stream(4, 0);
        for _ in 0..20 {
            let f = synth::random_hurwitz_matrix(&mut rng, 8);
            let g = synth::random_matrix(&mut rng, 8, 1.0);
            let q = &g * g.transpose();
            let p = solve_lyapunov(&f, &q).unwrap();
            let resid = &f * &p + &p * f.transpose() + &q;
            assert!(resid.norm() <= 1e-10 * q.norm(), "residual {}", resid.norm());
            assert!((0..8).all(|i| p[(i, i)] >= -1e-12));
        }
    }

    #[test]
    fn lyapunov_rejects_unstable_f() {
        let f = DMatrix::from_row_slice(1, 1, &[0.5]);
        let q = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert_eq!(solve_lyapunov(&f, &q), Err(Error::NotHurwitz));
    }

    #[test]
    fn riccati_scalar_example() {
        // F = -1, G = 1, H = 1, R = 2: P^2 - 6P + 1 = 0, stabilizing root 3 - 2*sqrt(2).
        let f = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let g = DMatrix::from_row_slice(1, 1, &[1.0]);
        let h = DMatrix::from_row_slice(1, 1, &[1.0]);
        let r = DMatrix::from_row_slice(1, 1, &[2.0]);
        let p = solve_are(&f, &g, &h, &r).unwrap();
        assert_relative_eq!(p[(0, 0)], 3.0 - 2.0 * 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn riccati_with_zero_g_gives_zero() {
        let f = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let g = DMatrix::<f64>::zeros(2, 1);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let r = DMatrix::from_row_slice(1, 1, &[1.0]);
        let p = solve_are(&f, &g, &h, &r).unwrap();
        assert!(p.norm() <= 1e-10);
    }

    #[test]
    fn riccati_residual_and_stability_on_random_positive_real_systems() {
        // Draw a random stable factor W(s) = C(sI-F)^{-1}B + D and convert to
        // additive-decomposition data (G = Pc C^T + B D^T, R = D D^T), which is
        // positive real by construction. The stabilizing solution must satisfy
        // 0 <= P <= Pc, with equality on the right only for minimum-phase W.
        let mut rng = crate::rng::stream(5, 0);
        for _ in 0..10 {
            let n = 6;
            let m = 2;
            let f = synth::random_hurwitz_matrix(&mut rng, n);
            let b = synth::random_matrix(&mut rng, n, 1.0).columns(0, m).into_owned();
            let c = synth::random_matrix(&mut rng, n, 1.0).rows(0, m).into_owned();
            let d = synth::random_spd(&mut rng, m);
            let pc = solve_lyapunov(&f, &(&b * b.transpose())).unwrap();
            let g = &pc * c.transpose() + &b * d.transpose();
            let r = &d * d.transpose();
            let p = solve_are(&f, &g, &c, &r).unwrap();
            let r_inv = r.clone().cholesky().unwrap().inverse();
            let gap = &g - &p * c.transpose();
            let resid = &f * &p + &p * f.transpose() + &gap * &r_inv * gap.transpose();
            assert!(resid.norm() <= 1e-9 * (1.0 + p.norm()), "residual {}", resid.norm());
            assert!((&p - p.transpose()).norm() <= 1e-10 * (1.0 + p.norm()));
            let closed = &f - &gap * &r_inv * &c;
            assert!(spectral_abscissa(&closed) < 0.0);
            let slack = &pc - &p;
            let min_eig = symmetrize(&slack).symmetric_eigen().eigenvalues.min();
            assert!(min_eig >= -1e-8 * (1.0 + pc.norm()), "P exceeds Pc: {min_eig}");
            let p_min = symmetrize(&p).symmetric_eigen().eigenvalues.min();
            assert!(p_min >= -1e-8 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn riccati_rejects_singular_r() {
        let f = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let g = DMatrix::from_row_slice(1, 1, &[1.0]);
        let h = DMatrix::from_row_slice(1, 1, &[1.0]);
        let r = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(solve_are(&f, &g, &h, &r), Err(Error::RSingular));
    }

    #[test]
    fn leverrier_matches_companion_characteristic_polynomial() {
        // Companion of s^2 + s + 1.
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let (chi, adj) = leverrier(&f);
        assert_eq!(chi.coeffs(), &[1.0, 1.0, 1.0]);
        // adj(sI - F) * (sI - F) = chi(s) I, spot check at s = 2.
        let s = 2.0;
        let adj_at = &adj[0] + &adj[1] * s;
        let prod = adj_at * (DMatrix::<f64>::identity(2, 2) * s - &f);
        assert_relative_eq!(prod, DMatrix::<f64>::identity(2, 2) * chi.eval_real(s), epsilon = 1e-12);
    }

    #[test]
    fn ranks_detect_uncontrollable_pairs() {
        let f = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let g_full = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let g_deficient = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(controllability_rank(&f, &g_full), 2);
        assert_eq!(controllability_rank(&f, &g_deficient), 1);
    }

    #[test]
    fn matrix_dto_round_trip_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let dto = MatrixDto::from_matrix(&m);
        assert_eq!(dto.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(dto.to_matrix().unwrap(), m);
    }
}
