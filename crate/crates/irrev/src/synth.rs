//! Random generators for well-posed test inputs: Hurwitz polynomials, stable
//! matrices, and positive definite blocks. The verification suite draws its
//! randomized ensembles from here so that every run is reproducible from a
//! single seed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::polyrat::Polynomial;

/// Dense matrix with independent `N(0, scale^2)` entries.
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        x * scale
    })
}

/// Random Hurwitz matrix: a Gaussian matrix shifted left until its spectral
/// abscissa sits strictly below a random margin in `[-1.2, -0.2]`.
pub fn random_hurwitz_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, 1.0 / (n as f64).sqrt());
    let alpha = crate::linalg::spectral_abscissa(&a);
    let margin = rng.random_range(0.2..1.2);
    &a - DMatrix::<f64>::identity(n, n) * (alpha + margin)
}

/// Random symmetric positive definite matrix with eigenvalues in `[0.5, 4]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, 1.0);
    let q = m.qr().q();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = rng.random_range(0.5..4.0);
    }
    &q * d * q.transpose()
}

/// Monic Hurwitz polynomial of exact degree `deg` built from random roots:
/// real parts in `[-2, -0.1]`, conjugate-pair imaginary parts in `[0.1, 2]`.
pub fn random_hurwitz_poly<R: Rng>(rng: &mut R, deg: usize) -> Polynomial {
    let mut roots: Vec<Complex64> = Vec::with_capacity(deg);
    while roots.len() < deg {
        let re = -rng.random_range(0.1..2.0);
        if deg - roots.len() >= 2 && rng.random_range(0.0..1.0) < 0.6 {
            let im = rng.random_range(0.1..2.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    Polynomial::from_roots(&roots, 1.0).expect("conjugate-closed root set")
}

/// Random normal Hurwitz matrix: an orthogonal conjugation of a real normal
/// form with eigenvalue real parts in `[-2, -0.1]`. Normality keeps every
/// eigenvalue perfectly conditioned, which matters when a test compares a
/// computed spectrum against its mirror at tight tolerance.
pub fn random_normal_hurwitz_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut i = 0;
    while i < n {
        let re = -rng.random_range(0.1..2.0);
        if i + 1 < n && rng.random_range(0.0..1.0) < 0.6 {
            let im = rng.random_range(0.1..2.0);
            m[(i, i)] = re;
            m[(i + 1, i + 1)] = re;
            m[(i, i + 1)] = im;
            m[(i + 1, i)] = -im;
            i += 2;
        } else {
            m[(i, i)] = re;
            i += 1;
        }
    }
    let q = random_matrix(rng, n, 1.0).qr().q();
    &q * m * q.transpose()
}

/// Random stable model `{F, G, H}` with `n <= max_n` states whose
/// controllability Gramian has reciprocal condition number at least `1e-6`.
/// Filtering on the Gramian keeps the backward-model identities testable at
/// tight tolerances; a raw single-input draw at n = 10 can be controllable
/// in exact arithmetic yet numerically singular.
pub fn random_controllable_model<R: Rng>(
    rng: &mut R,
    max_n: usize,
) -> crate::realization::StateSpaceModel {
    loop {
        let n = rng.random_range(1..=max_n);
        let r = rng.random_range(1..=n.min(3));
        let f = random_normal_hurwitz_matrix(rng, n);
        let g = random_matrix(rng, n, 1.0).columns(0, r).into_owned();
        let h = random_matrix(rng, n, 1.0).rows(0, 1).into_owned();
        let p = match crate::linalg::solve_lyapunov(&f, &(&g * g.transpose())) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let eigs = p.symmetric_eigen().eigenvalues;
        let (lo, hi) = (eigs.min(), eigs.max());
        if lo > 0.0 && lo >= 1e-6 * hi {
            return crate::realization::StateSpaceModel::new(f, g, h, None)
                .expect("dimensions agree by construction");
        }
    }
}

/// Numerator/denominator pair for a valid rational power spectrum: a Hurwitz
/// denominator of degree `den_deg`, a Hurwitz numerator of strictly lower
/// degree, and a positive gain. Returns `(gain, eta, chi)` so the spectrum is
/// `gain^2 * eta(s) eta(-s) / (chi(s) chi(-s))`.
pub fn random_spectral_factor<R: Rng>(
    rng: &mut R,
    den_deg: usize,
) -> (f64, Polynomial, Polynomial) {
    assert!(den_deg >= 1);
    let chi = random_hurwitz_poly(rng, den_deg);
    let num_deg = rng.random_range(0..den_deg);
    let eta = if num_deg == 0 {
        Polynomial::one()
    } else {
        random_hurwitz_poly(rng, num_deg)
    };
    let gain = rng.random_range(0.2..3.0);
    (gain, eta, chi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn hurwitz_polys_are_hurwitz() {
        let mut rng = stream(11, 0);
        for _ in 0..50 {
            let deg = rng.random_range(1..9usize);
            let p = random_hurwitz_poly(&mut rng, deg);
            assert_eq!(p.degree(), Some(deg));
            assert!(p.is_hurwitz());
        }
    }

    #[test]
    fn hurwitz_matrices_are_hurwitz() {
        let mut rng = stream(12, 0);
        for _ in 0..20 {
            let f = random_hurwitz_matrix(&mut rng, 7);
            assert!(crate::linalg::is_hurwitz_matrix(&f));
        }
    }

    #[test]
    fn spd_is_positive_definite() {
        let mut rng = stream(13, 0);
        for _ in 0..20 {
            let m = random_spd(&mut rng, 5);
            assert!(m.clone().cholesky().is_some());
        }
    }
}
