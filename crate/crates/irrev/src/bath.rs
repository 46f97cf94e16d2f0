//! Finite-dimensional Hamiltonian heat bath: the canonical flow of N
//! oscillators, its invariant Maxwell-Boltzmann measure, the characteristic
//! functional of that measure, and whiteness diagnostics for the momentum
//! field.
//!
//! State is the stacked phase vector `(q, p)` with Hamiltonian
//! `H = (|p|^2 + q^T V^2 q) / 2`, so the generator is
//! `A = [[0, I], [-V^2, 0]]`. The invariant Gaussian has covariance
//! `Sigma = blkdiag(beta V^{-2}, beta I)`, the unique one satisfying the
//! stationarity identity `A Sigma + Sigma A^T = 0` for this flow.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, expm, MatrixDto};
use crate::rng;

/// Truncated bath: N oscillator modes with squared frequency matrix `V^2`
/// at temperature `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BathDto", into = "BathDto")]
pub struct FiniteBath {
    vsq: DMatrix<f64>,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct BathDto {
    #[serde(rename = "Vsq")]
    vsq: MatrixDto,
    beta: f64,
}

impl TryFrom<BathDto> for FiniteBath {
    type Error = Error;

    fn try_from(dto: BathDto) -> Result<Self> {
        FiniteBath::new(dto.vsq.to_matrix()?, dto.beta)
    }
}

impl From<FiniteBath> for BathDto {
    fn from(bath: FiniteBath) -> Self {
        BathDto {
            vsq: MatrixDto::from_matrix(&bath.vsq),
            beta: bath.beta,
        }
    }
}

impl FiniteBath {
    pub fn new(vsq: DMatrix<f64>, beta: f64) -> Result<Self> {
        let n = vsq.nrows();
        if vsq.ncols() != n || n == 0 {
            return Err(Error::dim("V^2 must be square and nonempty"));
        }
        let asym = (&vsq - vsq.transpose()).norm();
        if asym > 1e-12 * vsq.norm().max(1.0) {
            return Err(Error::InvalidArgument("V^2 must be symmetric".into()));
        }
        let eigs = vsq.clone().symmetric_eigen().eigenvalues;
        if eigs.min() <= 0.0 {
            return Err(Error::InvalidArgument(
                "V^2 must be positive definite".into(),
            ));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidArgument(
                "temperature beta must be positive".into(),
            ));
        }
        Ok(FiniteBath { vsq, beta })
    }

    pub fn dim(&self) -> usize {
        self.vsq.nrows()
    }

    pub fn vsq(&self) -> &DMatrix<f64> {
        &self.vsq
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Generator of the canonical equations on the stacked `(q, p)` vector.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = 1.0;
        }
        for i in 0..n {
            for j in 0..n {
                a[(n + i, j)] = -self.vsq[(i, j)];
            }
        }
        a
    }

    /// `H(q, p) = (|p|^2 + q^T V^2 q) / 2`.
    pub fn hamiltonian(&self, sample: &PhaseSample) -> f64 {
        let potential = (sample.q.transpose() * &self.vsq * &sample.q)[(0, 0)];
        0.5 * (sample.p.norm_squared() + potential)
    }
}

/// One draw of the bath phase variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSample {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

/// The symplectic propagator `Phi(t) = exp(t A)`.
pub fn canonical_flow(bath: &FiniteBath, t: f64) -> DMatrix<f64> {
    expm(&(bath.generator() * t))
}

/// Covariance of the invariant Gaussian measure in `(q, p)` coordinates:
/// `blkdiag(beta V^{-2}, beta I)`.
pub fn invariant_covariance(bath: &FiniteBath) -> Result<DMatrix<f64>> {
    let n = bath.dim();
    let vinv2 = linalg::sym_power(&bath.vsq, -1.0)?;
    let mut sigma = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] = bath.beta * vinv2[(i, j)];
        }
        sigma[(n + i, n + i)] = bath.beta;
    }
    Ok(sigma)
}

const SAMPLE_CHUNK: usize = 1024;

/// Draws `count` independent samples of the invariant measure. Work is
/// chunked with one generator stream per chunk and the chunks are merged in
/// index order, so the output depends only on `(count, seed)` and not on the
/// number of worker threads.
pub fn sample_phase(bath: &FiniteBath, count: usize, seed: u64) -> Result<Vec<PhaseSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let n = bath.dim();
    let q_factor = linalg::sym_power(&bath.vsq, -0.5)? * bath.beta.sqrt();
    let sqrt_beta = bath.beta.sqrt();
    let chunk_count = count.div_ceil(SAMPLE_CHUNK);
    let per_chunk: Vec<Vec<PhaseSample>> = (0..chunk_count)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64 + 1);
            let lo = c * SAMPLE_CHUNK;
            let hi = count.min(lo + SAMPLE_CHUNK);
            (lo..hi)
                .map(|_| {
                    let zq = rng::normal_vector(&mut rng, n);
                    let zp = rng::normal_vector(&mut rng, n);
                    PhaseSample {
                        q: &q_factor * zq,
                        p: zp * sqrt_beta,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Characteristic functional of the invariant measure at frequencies
/// `(pi, xi)`: `E exp{i(<pi, p> + <xi, q>)}`, which evaluates to
/// `exp{-(beta/2)(|pi|^2 + xi^T V^{-2} xi)}`.
pub fn characteristic_functional(
    bath: &FiniteBath,
    pi: &DVector<f64>,
    xi: &DVector<f64>,
) -> Result<f64> {
    let n = bath.dim();
    if pi.len() != n || xi.len() != n {
        return Err(Error::dim("pi and xi must match the bath dimension"));
    }
    let chol = bath
        .vsq
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("V^2 must be positive definite".into()))?;
    let vinv2_xi = chol.solve(xi);
    let quad = pi.norm_squared() + xi.dot(&vinv2_xi);
    Ok((-0.5 * bath.beta * quad).exp())
}

/// Correlation diagnostics on a batch of phase samples: how many
/// momentum-momentum and momentum-position correlation entries stay inside
/// the `3 / sqrt(count)` Monte-Carlo band.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitenessReport {
    pub count: usize,
    pub band: f64,
    pub momentum_offdiag_fraction: f64,
    pub cross_fraction: f64,
    pub pass: bool,
}

/// Checks that the momentum coordinates decorrelate across modes and from
/// the positions, the finite-sample rendering of momentum-field whiteness.
pub fn momentum_whiteness(bath: &FiniteBath, samples: &[PhaseSample]) -> Result<WhitenessReport> {
    let count = samples.len();
    if count < 1000 {
        return Err(Error::TooFewSamples {
            needed: 1000,
            got: count,
        });
    }
    let n = bath.dim();
    for s in samples {
        if s.q.len() != n || s.p.len() != n {
            return Err(Error::dim("sample dimension does not match the bath"));
        }
    }
    let mut mean_p = DVector::<f64>::zeros(n);
    let mut mean_q = DVector::<f64>::zeros(n);
    for s in samples {
        mean_p += &s.p;
        mean_q += &s.q;
    }
    mean_p /= count as f64;
    mean_q /= count as f64;

    let mut cov_pp = DMatrix::<f64>::zeros(n, n);
    let mut cov_pq = DMatrix::<f64>::zeros(n, n);
    let mut cov_qq_diag = DVector::<f64>::zeros(n);
    for s in samples {
        let dp = &s.p - &mean_p;
        let dq = &s.q - &mean_q;
        cov_pp += &dp * dp.transpose();
        cov_pq += &dp * dq.transpose();
        for i in 0..n {
            cov_qq_diag[i] += dq[i] * dq[i];
        }
    }
    let norm = (count - 1) as f64;
    cov_pp /= norm;
    cov_pq /= norm;
    cov_qq_diag /= norm;

    let band = 3.0 / (count as f64).sqrt();
    let mut off_ok = 0usize;
    let mut off_total = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let denom = (cov_pp[(i, i)] * cov_pp[(j, j)]).sqrt();
            let corr = cov_pp[(i, j)] / denom.max(f64::MIN_POSITIVE);
            off_total += 1;
            if corr.abs() <= band {
                off_ok += 1;
            }
        }
    }
    let mut cross_ok = 0usize;
    for i in 0..n {
        for j in 0..n {
            let denom = (cov_pp[(i, i)] * cov_qq_diag[j]).sqrt();
            let corr = cov_pq[(i, j)] / denom.max(f64::MIN_POSITIVE);
            if corr.abs() <= band {
                cross_ok += 1;
            }
        }
    }
    let momentum_offdiag_fraction = if off_total == 0 {
        1.0
    } else {
        off_ok as f64 / off_total as f64
    };
    let cross_fraction = cross_ok as f64 / (n * n) as f64;
    Ok(WhitenessReport {
        count,
        band,
        momentum_offdiag_fraction,
        cross_fraction,
        pass: momentum_offdiag_fraction >= 0.99 && cross_fraction >= 0.99,
    })
}

/// Convergence of the characteristic functional under mode doubling, for the
/// diagonal ladder bath `V^2 = diag(1, 4, 9, ...)` probed along the
/// square-summable direction `pi_k = xi_k = 1/k`. Returns rows
/// `(N, C_N, |C_N - C_{N/2}|)` starting at `N = 2`.
pub fn convergence_diagnostic(beta: f64, doublings: usize) -> Result<Vec<(usize, f64, f64)>> {
    let mut rows = Vec::with_capacity(doublings + 1);
    let mut previous: Option<f64> = None;
    for level in 0..=doublings {
        let n = 2usize << level;
        let vsq = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                ((i + 1) * (i + 1)) as f64
            } else {
                0.0
            }
        });
        let bath = FiniteBath::new(vsq, beta)?;
        let direction = DVector::<f64>::from_fn(n, |k, _| 1.0 / (k + 1) as f64);
        let c = characteristic_functional(&bath, &direction, &direction)?;
        let delta = previous.map_or(f64::NAN, |prev: f64| (c - prev).abs());
        rows.push((n, c, delta));
        previous = Some(c);
    }
    Ok(rows)
}
