//! Real polynomials and rational functions in the transform variable `s`.
//!
//! Coefficients are stored in ascending order, `p(s) = c[0] + c[1] s + ...`,
//! with trailing zeros stripped so the vector length determines the degree.
//! The zero polynomial is the empty vector and reports degree `None`.
//! Rational functions are kept with a monic denominator; cancellation of
//! near-common roots is an explicit operation, never something that happens
//! silently inside arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::{TOL_COPRIME, TOL_HURWITZ};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, stripping trailing
    /// zeros and canonicalizing negative zeros so serialized output is stable.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        for c in &mut coeffs {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![1.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `s` itself, handy for building tests.
    pub fn s() -> Self {
        Polynomial { coeffs: vec![0.0, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^k`, zero beyond the stored degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Largest coefficient magnitude, used as the scale for relative cutoffs.
    pub fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.coeff(k) + other.coeff(k);
        }
        Polynomial::new(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// `p(-s)`: flips the sign of every odd coefficient.
    pub fn mirror(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
                .collect(),
        )
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(k, &c)| (k as f64 + 1.0) * c)
                .collect(),
        )
    }

    /// Splits into the parts with even and odd powers, `p = p_even + p_odd`.
    pub fn even_odd_split(&self) -> (Polynomial, Polynomial) {
        let even = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 0 { c } else { 0.0 })
            .collect();
        let odd = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 1 { c } else { 0.0 })
            .collect();
        (Polynomial::new(even), Polynomial::new(odd))
    }

    /// True when all odd coefficients vanish relative to the coefficient scale.
    pub fn is_even(&self, rel_tol: f64) -> bool {
        let scale = self.coeff_scale().max(f64::MIN_POSITIVE);
        self.coeffs
            .iter()
            .skip(1)
            .step_by(2)
            .all(|c| c.abs() <= rel_tol * scale)
    }

    /// True when all even coefficients vanish relative to the coefficient scale.
    pub fn is_odd(&self, rel_tol: f64) -> bool {
        let scale = self.coeff_scale().max(f64::MIN_POSITIVE);
        self.coeffs
            .iter()
            .step_by(2)
            .all(|c| c.abs() <= rel_tol * scale)
    }

    /// Drops trailing coefficients below `rel_tol` times the coefficient scale.
    /// Use after sums that are known to cancel the top terms exactly.
    pub fn trimmed(&self, rel_tol: f64) -> Polynomial {
        let scale = self.coeff_scale();
        let mut coeffs = self.coeffs.clone();
        while coeffs
            .last()
            .is_some_and(|c| c.abs() <= rel_tol * scale)
        {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    /// Monic rescaling. Fails on the zero polynomial.
    pub fn monic(&self) -> Result<Polynomial> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(self.scale(1.0 / self.leading()))
    }

    /// Reconstructs `leading * prod (s - r_i)` from a conjugate-closed root set.
    pub fn from_roots(roots: &[Complex64], leading: f64) -> Result<Polynomial> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut out = Vec::with_capacity(c.len());
        for z in &c {
            if z.im.abs() > 1e-7 * scale {
                return Err(Error::InvalidArgument(
                    "root set is not closed under conjugation".into(),
                ));
            }
            out.push(z.re * leading);
        }
        Ok(Polynomial::new(out))
    }

    /// All roots with multiplicity. Degrees one and two use the closed
    /// formulas; higher degrees run the Aberth-Ehrlich simultaneous
    /// iteration, which keeps converging (linearly) on multiple roots where
    /// shifted-QR companion eigenvalues can stall outright.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            None => return Err(Error::ZeroPolynomial),
            Some(0) => return Ok(vec![]),
            Some(n) => n,
        };
        let lead = self.leading();
        if n == 1 {
            return Ok(vec![Complex64::new(-self.coeffs[0] / lead, 0.0)]);
        }
        if n == 2 {
            let b = self.coeffs[1] / lead;
            let c = self.coeffs[0] / lead;
            let disc = b * b - 4.0 * c;
            if disc >= 0.0 {
                // Standard trick avoiding cancellation in the smaller root.
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
                return Ok(vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]);
            }
            let re = -b / 2.0;
            let im = (-disc).sqrt() / 2.0;
            return Ok(vec![Complex64::new(re, im), Complex64::new(re, -im)]);
        }
        let monic: Vec<f64> = self.coeffs.iter().map(|c| c / lead).collect();
        let radius = 1.0 + monic[..n].iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.41;
                let r = radius * (0.6 + 0.3 * (k + 1) as f64 / n as f64);
                Complex64::from_polar(r, angle)
            })
            .collect();
        for _ in 0..400 {
            let mut moved = 0.0f64;
            for i in 0..n {
                if !z[i].re.is_finite() || !z[i].im.is_finite() {
                    z[i] = Complex64::from_polar(radius * 0.3, 2.5 * (i + 1) as f64);
                }
                let (p, dp) = eval_with_derivative(&monic, z[i]);
                if p.norm() == 0.0 {
                    continue;
                }
                let newton = if dp.norm() == 0.0 {
                    Complex64::new(1e-8 * radius, 1e-8 * radius)
                } else {
                    p / dp
                };
                let mut repulsion = Complex64::new(0.0, 0.0);
                for (j, &zj) in z.iter().enumerate() {
                    if j != i && (z[i] - zj).norm() > 0.0 {
                        repulsion += (z[i] - zj).inv();
                    }
                }
                let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
                let step = if denom.norm() < 1e-300 {
                    newton
                } else {
                    newton / denom
                };
                z[i] -= step;
                moved = moved.max(step.norm() / z[i].norm().max(1.0));
            }
            if moved < 1e-15 {
                break;
            }
        }
        if z.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
            return Err(Error::Numerical("root iteration diverged".into()));
        }
        pair_conjugates(&mut z);

        // Multiple roots stall the simultaneous iteration at accuracy
        // eps^(1/m). Cluster the candidates, Newton-polish each cluster
        // center on the derivative order where it becomes a simple root, and
        // accept the polished multiset only when it reproduces the input
        // coefficients; otherwise keep the raw roots.
        let scale = z.iter().map(|r| r.norm()).fold(1.0, f64::max);
        let coeff_scale = self.coeff_scale();
        'tols: for tol_rel in [1e-3, 1e-6] {
            let tol = tol_rel * scale;
            let clusters = cluster_indices(&z, tol);
            let mut refined = Vec::with_capacity(n);
            for group in &clusters {
                let m = group.len();
                let centroid = group.iter().map(|&g| z[g]).sum::<Complex64>() / m as f64;
                let mut diameter = 0.0f64;
                for &a in group {
                    for &b in group {
                        diameter = diameter.max((z[a] - z[b]).norm());
                    }
                }
                let polished = self.polish_root(centroid, m, diameter + tol);
                for _ in 0..m {
                    refined.push(polished);
                }
            }
            pair_conjugates(&mut refined);
            if let Ok(rebuilt) = Polynomial::from_roots(&refined, lead) {
                let close = (0..=n)
                    .all(|k| (rebuilt.coeff(k) - self.coeff(k)).abs() <= 1e-9 * coeff_scale);
                if close {
                    z = refined;
                    break 'tols;
                }
            }
        }
        Ok(z)
    }

    /// Newton polish on the `(multiplicity-1)`-th derivative, where a root of
    /// that multiplicity is simple. Returns the starting point unchanged when
    /// the iteration wanders past the leash.
    fn polish_root(&self, z0: Complex64, multiplicity: usize, leash: f64) -> Complex64 {
        let mut d = self.clone();
        for _ in 1..multiplicity {
            d = d.derivative();
        }
        let mut z = z0;
        for _ in 0..60 {
            let (p, dp) = eval_with_derivative(d.coeffs(), z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
        if (z - z0).norm() > leash {
            z0
        } else {
            z
        }
    }

    /// True when every root lies strictly left of the `-TOL_HURWITZ` band.
    /// Constants count as Hurwitz, the zero polynomial does not.
    pub fn is_hurwitz(&self) -> bool {
        match self.roots() {
            Err(_) => false,
            Ok(roots) => roots.iter().all(|r| r.re < -TOL_HURWITZ),
        }
    }
}

/// Single-link clustering of a root multiset at an absolute tolerance.
fn cluster_indices(roots: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = roots.len();
    let mut assigned = vec![false; n];
    let mut clusters = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let mut group = vec![i];
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..n {
                if !assigned[j] && group.iter().any(|&g| (roots[g] - roots[j]).norm() <= tol) {
                    assigned[j] = true;
                    group.push(j);
                    grew = true;
                }
            }
        }
        clusters.push(group);
    }
    clusters
}

/// Rewrites the multiset as an exactly conjugate-closed one by greedy
/// nearest-conjugate matching. Real polynomials have conjugate-closed root
/// sets, but iterated root clusters come back slightly asymmetric; averaging
/// each root with its partner's conjugate restores the symmetry without
/// moving anything farther than the cluster radius.
fn pair_conjugates(roots: &mut Vec<Complex64>) {
    let n = roots.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| roots[b].im.abs().partial_cmp(&roots[a].im.abs()).unwrap());
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = roots[i].conj();
        let mut best = i;
        let mut best_d = (target - roots[i]).norm();
        for &j in &order {
            if !used[j] {
                let d = (target - roots[j]).norm();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        if best == i {
            out.push(Complex64::new(roots[i].re, 0.0));
        } else {
            used[best] = true;
            let z = (roots[i] + roots[best].conj()) * 0.5;
            out.push(z);
            out.push(z.conj());
        }
    }
    *roots = out;
}

/// Value and derivative of a monic-coefficient polynomial by one Horner pass.
fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Ratio of two real polynomials, kept with a monic denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RationalDto", into = "RationalDto")]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

#[derive(Serialize, Deserialize)]
struct RationalDto {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RationalDto> for RationalFunction {
    type Error = Error;
    fn try_from(dto: RationalDto) -> Result<Self> {
        RationalFunction::new(Polynomial::new(dto.num), Polynomial::new(dto.den))
    }
}

impl From<RationalFunction> for RationalDto {
    fn from(r: RationalFunction) -> Self {
        RationalDto {
            num: r.num.coeffs,
            den: r.den.coeffs,
        }
    }
}

impl RationalFunction {
    /// Normalizes the denominator to monic. The numerator absorbs the scale.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let lead = den.leading();
        Ok(RationalFunction {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    pub fn constant(c: f64) -> Self {
        RationalFunction {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        RationalFunction {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }

    /// Squared modulus along the imaginary axis.
    pub fn abs2_on_axis(&self, lambda: f64) -> f64 {
        self.eval(Complex64::new(0.0, lambda)).norm_sqr()
    }

    /// Degree of numerator minus degree of denominator; the zero function
    /// counts as strictly proper.
    pub fn is_strictly_proper(&self) -> bool {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => true,
            (Some(p), Some(q)) => p < q,
            (Some(_), None) => unreachable!("denominator is never zero"),
        }
    }

    pub fn is_proper(&self) -> bool {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => true,
            (Some(p), Some(q)) => p <= q,
            (Some(_), None) => unreachable!("denominator is never zero"),
        }
    }

    pub fn mul(&self, other: &RationalFunction) -> Result<RationalFunction> {
        RationalFunction::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    /// Reciprocal, without any reduction.
    pub fn inv(&self) -> Result<RationalFunction> {
        if self.num.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        RationalFunction::new(self.den.clone(), self.num.clone())
    }

    /// Cancels numerator and denominator roots that agree within `tol`
    /// relative to `max(1, |root|)`, then rebuilds both polynomials from the
    /// surviving roots. Multiplicities are respected because roots are listed
    /// with repetition.
    pub fn reduced_with(&self, tol: f64) -> Result<RationalFunction> {
        if self.num.is_zero() {
            return Ok(RationalFunction::zero());
        }
        let num_roots = self.num.roots()?;
        let den_roots = self.den.roots()?;
        let mut keep_den = vec![true; den_roots.len()];
        let mut keep_num = vec![true; num_roots.len()];
        for (i, rn) in num_roots.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, rd) in den_roots.iter().enumerate() {
                if !keep_den[j] {
                    continue;
                }
                let d = (rn - rd).norm();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if let Some((j, d)) = best {
                if d <= tol * den_roots[j].norm().max(1.0) {
                    keep_num[i] = false;
                    keep_den[j] = false;
                }
            }
        }
        if keep_num.iter().all(|&k| k) {
            // Nothing cancels: keep the exact input coefficients instead of
            // round-tripping them through the computed roots.
            return Ok(self.clone());
        }
        let rem_num: Vec<Complex64> = num_roots
            .iter()
            .zip(&keep_num)
            .filter_map(|(r, keep)| keep.then_some(*r))
            .collect();
        let rem_den: Vec<Complex64> = den_roots
            .iter()
            .zip(&keep_den)
            .filter_map(|(r, keep)| keep.then_some(*r))
            .collect();
        let num = Polynomial::from_roots(&rem_num, self.num.leading())?;
        let den = Polynomial::from_roots(&rem_den, self.den.leading())?;
        RationalFunction::new(num, den)
    }

    pub fn reduced(&self) -> Result<RationalFunction> {
        self.reduced_with(TOL_COPRIME)
    }

    /// True when no numerator root sits within `tol` of a denominator root.
    pub fn is_coprime(&self, tol: f64) -> Result<bool> {
        if self.num.is_zero() {
            return Ok(false);
        }
        if self.num.degree() == Some(0) || self.den.degree() == Some(0) {
            return Ok(true);
        }
        let num_roots = self.num.roots()?;
        let den_roots = self.den.roots()?;
        for rn in &num_roots {
            for rd in &den_roots {
                if (rn - rd).norm() <= tol * rd.norm().max(1.0) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Root-cancellation normal form of `num/den` (monic denominator, coprime
/// within the default tolerance).
pub fn coprime_reduce(num: &Polynomial, den: &Polynomial) -> Result<RationalFunction> {
    RationalFunction::new(num.clone(), den.clone())?.reduced()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(coeffs: &[f64]) -> Polynomial {
        Polynomial::new(coeffs.to_vec())
    }

    #[test]
    fn eval_on_the_unit_circle() {
        // (s^2 + s + 1) at s = j is j.
        let v = p(&[1.0, 1.0, 1.0]).eval(Complex64::new(0.0, 1.0));
        assert_relative_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_roots_match_the_formula() {
        let roots = p(&[1.0, 1.0, 1.0]).roots().unwrap();
        let expected_im = 3.0f64.sqrt() / 2.0;
        for r in &roots {
            assert_relative_eq!(r.re, -0.5, epsilon = 1e-12);
            assert_relative_eq!(r.im.abs(), expected_im, epsilon = 1e-12);
        }
        assert!(roots[0].im * roots[1].im < 0.0);
    }

    #[test]
    fn hurwitz_judgments() {
        assert!(p(&[1.0, 1.0, 1.0]).is_hurwitz());
        assert!(!p(&[1.0, -1.0, 1.0]).is_hurwitz());
        assert!(!p(&[1.0, 0.0, 1.0]).is_hurwitz()); // roots on the axis
        assert!(p(&[5.0]).is_hurwitz()); // constant, vacuously
        assert!(!Polynomial::zero().is_hurwitz());
    }

    #[test]
    fn zero_polynomial_has_no_roots() {
        assert_eq!(Polynomial::zero().roots(), Err(Error::ZeroPolynomial));
        assert_eq!(Polynomial::zero().degree(), None);
    }

    #[test]
    fn trailing_zeros_are_stripped() {
        let q = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(q.degree(), Some(1));
        assert_eq!(q.coeffs(), &[1.0, 2.0]);
    }

    #[test]
    fn root_coefficient_round_trip_stays_tight_up_to_degree_twelve() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let deg = rng.random_range(1..=12usize);
            let mut coeffs: Vec<f64> = (0..deg).map(|_| rng.random_range(-2.0..2.0)).collect();
            coeffs.push(rng.random_range(0.5..2.0));
            let poly = Polynomial::new(coeffs);
            let rebuilt = Polynomial::from_roots(&poly.roots().unwrap(), poly.leading()).unwrap();
            let scale = poly.coeff_scale();
            for k in 0..=deg {
                assert!(
                    (rebuilt.coeff(k) - poly.coeff(k)).abs() <= 1e-6 * scale,
                    "coefficient {k} drifted: {} vs {}",
                    rebuilt.coeff(k),
                    poly.coeff(k)
                );
            }
        }
    }

    #[test]
    fn coprime_reduce_cancels_shared_roots() {
        // (s+1)(s+2) over (s+1)(s+3) reduces to (s+2)/(s+3).
        let num = p(&[1.0, 1.0]).mul(&p(&[2.0, 1.0]));
        let den = p(&[1.0, 1.0]).mul(&p(&[3.0, 1.0]));
        let r = coprime_reduce(&num, &den).unwrap();
        assert_eq!(r.num().degree(), Some(1));
        assert_eq!(r.den().degree(), Some(1));
        assert_relative_eq!(r.num().coeff(0), 2.0, epsilon = 1e-10);
        assert_relative_eq!(r.den().coeff(0), 3.0, epsilon = 1e-10);
    }

    #[test]
    fn coprime_reduce_respects_the_tolerance() {
        // Roots 1e-6 apart stay; 1e-9 apart cancel.
        let far = coprime_reduce(&p(&[1.0 + 1e-6, 1.0]), &p(&[1.0, 1.0])).unwrap();
        assert_eq!(far.num().degree(), Some(1));
        let near = coprime_reduce(&p(&[1.0 + 1e-9, 1.0]), &p(&[1.0, 1.0])).unwrap();
        assert_eq!(near.num().degree(), Some(0));
        assert_eq!(near.den().degree(), Some(0));
    }

    #[test]
    fn reduction_preserves_values_on_a_grid() {
        let num = p(&[1.0, 1.0]).mul(&p(&[2.0, 1.0])).mul(&p(&[1.0, 0.0, 1.0]));
        let den = p(&[1.0, 1.0]).mul(&p(&[5.0, 1.0])).mul(&p(&[1.0, 0.0, 1.0]));
        let raw = RationalFunction::new(num, den).unwrap();
        let red = raw.reduced().unwrap();
        for k in -20..=20 {
            let s = Complex64::new(0.3 * k as f64, 0.7);
            let a = raw.eval(s);
            let b = red.eval(s);
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
        }
    }

    #[test]
    fn zero_numerator_reduces_to_canonical_zero() {
        let r = coprime_reduce(&Polynomial::zero(), &p(&[1.0, 1.0])).unwrap();
        assert!(r.is_zero());
        assert_eq!(r.den(), &Polynomial::one());
    }

    #[test]
    fn denominator_is_kept_monic() {
        let r = RationalFunction::new(p(&[2.0]), p(&[2.0, 0.0, 2.0])).unwrap();
        assert_relative_eq!(r.den().leading(), 1.0);
        assert_relative_eq!(r.num().coeff(0), 1.0);
    }

    #[test]
    fn zero_denominator_is_rejected() {
        assert_eq!(
            RationalFunction::new(p(&[1.0]), Polynomial::zero()),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn serde_round_trip_keeps_shapes() {
        let r = RationalFunction::new(p(&[0.0, 2.0]), p(&[2.0, 0.0, 2.0])).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: RationalFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
        let poly_json = serde_json::to_string(&p(&[1.0, 0.0, 3.0])).unwrap();
        assert_eq!(poly_json, "[1.0,0.0,3.0]");
    }

    proptest! {
        #[test]
        fn even_odd_split_recombines(coeffs in proptest::collection::vec(-5.0f64..5.0, 0..10)) {
            let poly = Polynomial::new(coeffs);
            let (even, odd) = poly.even_odd_split();
            prop_assert_eq!(even.add(&odd), poly.clone());
            prop_assert!(even.is_even(0.0));
            prop_assert!(odd.is_odd(0.0));
        }

        #[test]
        fn mirror_matches_evaluation_at_minus_s(
            coeffs in proptest::collection::vec(-5.0f64..5.0, 1..10),
            re in -2.0f64..2.0,
            im in -2.0f64..2.0,
        ) {
            let poly = Polynomial::new(coeffs);
            let s = Complex64::new(re, im);
            let a = poly.mirror().eval(s);
            let b = poly.eval(-s);
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }

        #[test]
        fn product_evaluates_as_product(
            a in proptest::collection::vec(-3.0f64..3.0, 1..6),
            b in proptest::collection::vec(-3.0f64..3.0, 1..6),
            x in -2.0f64..2.0,
        ) {
            let pa = Polynomial::new(a);
            let pb = Polynomial::new(b);
            let lhs = pa.mul(&pb).eval_real(x);
            let rhs = pa.eval_real(x) * pb.eval_real(x);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn reduction_is_idempotent(
            roots_num in proptest::collection::vec(-3.0f64..-0.2, 1..4),
            roots_den in proptest::collection::vec(0.2f64..3.0, 1..4),
        ) {
            let num_roots: Vec<Complex64> =
                roots_num.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            let den_roots: Vec<Complex64> =
                roots_den.iter().map(|&r| Complex64::new(-r, 0.0)).collect();
            let num = Polynomial::from_roots(&num_roots, 1.0).unwrap();
            let den = Polynomial::from_roots(&den_roots, 1.0).unwrap();
            let once = coprime_reduce(&num, &den).unwrap();
            let twice = once.reduced().unwrap();
            prop_assert_eq!(once.num().degree(), twice.num().degree());
            prop_assert_eq!(once.den().degree(), twice.den().degree());
        }
    }
}
