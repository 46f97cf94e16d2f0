//! Statistical instruments that close the loop between simulated paths and
//! closed-form predictions: Welch spectral estimates, empirical covariances,
//! whiteness bands, increment-variance regression, the Paley-Wiener integral,
//! and the Gaussian entropy trajectory.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quad::adaptive_simpson;
use crate::realization::ForwardBackwardPair;
use crate::simulate::SamplePath;
use crate::spectral::{validate_density, ScalarSpectralDensity};

/// Taper applied to each Welch segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Hann,
}

impl Window {
    fn weights(self, len: usize) -> Vec<f64> {
        match self {
            // Periodic form, so the DFT bins stay orthogonal over the segment.
            Window::Hann => (0..len)
                .map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / len as f64).cos()))
                .collect(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
        }
    }
}

/// Segment length used when the caller does not pick one.
pub const DEFAULT_SEGMENT_LENGTH: usize = 1 << 14;
/// Overlap fraction used when the caller does not pick one.
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// Averaged cross-periodogram on the interior frequency bins, scaled so a
/// white sequence of variance `v` sits at the flat two-sided level `v·dt`.
#[derive(Clone, Debug)]
pub struct SpectralEstimate {
    pub freqs: Vec<f64>,
    pub values: Vec<DMatrix<Complex64>>,
    pub segment_count: usize,
    pub window: String,
    pub dt: f64,
}

impl SpectralEstimate {
    pub fn new(
        freqs: Vec<f64>,
        values: Vec<DMatrix<Complex64>>,
        segment_count: usize,
        window: String,
        dt: f64,
    ) -> Result<Self> {
        if freqs.len() != values.len() || freqs.is_empty() {
            return Err(Error::dim(
                "spectral estimate needs one matrix per frequency",
            ));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::NonPositiveDt);
        }
        let nyquist = PI / dt;
        for pair in freqs.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidArgument(
                    "spectral estimate frequencies must be strictly increasing".into(),
                ));
            }
        }
        if freqs[0] <= 0.0 || *freqs.last().unwrap() >= nyquist {
            return Err(Error::InvalidArgument(
                "spectral estimate frequencies must lie strictly inside (0, pi/dt)".into(),
            ));
        }
        let m = values[0].nrows();
        for v in &values {
            if v.nrows() != m || v.ncols() != m {
                return Err(Error::dim("spectral estimate matrices must be square"));
            }
            let scale = v.norm().max(1.0);
            if (v - v.adjoint()).norm() > 1e-10 * scale {
                return Err(Error::Numerical(
                    "spectral estimate value is not Hermitian".into(),
                ));
            }
            let min_eig = if m == 1 {
                v[(0, 0)].re
            } else {
                let herm = (v + v.adjoint()) * Complex64::new(0.5, 0.0);
                herm.symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |a, &b| a.min(b))
            };
            if min_eig < -1e-10 * scale {
                return Err(Error::Numerical(
                    "spectral estimate value is not positive semidefinite".into(),
                ));
            }
        }
        Ok(Self {
            freqs,
            values,
            segment_count,
            window,
            dt,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.values[0].nrows()
    }

    /// Real scalar levels, available when the path had one output channel.
    pub fn scalar_values(&self) -> Result<Vec<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::dim("spectral estimate is not scalar"));
        }
        Ok(self.values.iter().map(|v| v[(0, 0)].re).collect())
    }

    /// Relative L1 distance to a reference density over the bins inside
    /// `[lo, hi]`: `Σ|Ŝ(ω) - Φ(ω)| / Σ Φ(ω)`.
    pub fn l1_relative_error<F: Fn(f64) -> f64>(&self, phi: F, lo: f64, hi: f64) -> Result<f64> {
        let values = self.scalar_values()?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, s) in self.freqs.iter().zip(&values) {
            if *w < lo || *w > hi {
                continue;
            }
            let want = phi(*w);
            num += (s - want).abs();
            den += want;
        }
        if den <= 0.0 {
            return Err(Error::InvalidArgument(
                "no frequency bins inside the requested band".into(),
            ));
        }
        Ok(num / den)
    }
}

fn path_mean(path: &SamplePath) -> DVector<f64> {
    let m = path.value_dim();
    let mut mean = DVector::zeros(m);
    for v in &path.values {
        mean += v;
    }
    mean / path.len() as f64
}

/// Welch averaged cross-periodogram of a path: mean is removed globally, each
/// overlapped segment is tapered and transformed, and the segment spectra are
/// averaged in fixed segment order. DC and Nyquist bins are dropped.
pub fn welch_psd(
    path: &SamplePath,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<SpectralEstimate> {
    let n = path.len();
    let l = segment_length;
    if l < 8 {
        return Err(Error::InvalidArgument(
            "segment length must be at least 8".into(),
        ));
    }
    if n < 2 * l {
        return Err(Error::PathTooShort);
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidArgument(
            "overlap fraction must lie in [0, 1)".into(),
        ));
    }
    let m = path.value_dim();
    let step = ((l as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let starts: Vec<usize> = (0..=n - l).step_by(step).collect();
    let segments = starts.len();

    let mean = path_mean(path);
    let weights = window.weights(l);
    let weight_power: f64 = weights.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);

    let bins = l.div_ceil(2) - 1;
    let per_segment: Vec<Vec<Complex64>> = starts
        .par_iter()
        .map(|&s| {
            let mut channel_dfts = Vec::with_capacity(m);
            for ch in 0..m {
                let mut buf: Vec<Complex64> = (0..l)
                    .map(|j| {
                        Complex64::new((path.values[s + j][ch] - mean[ch]) * weights[j], 0.0)
                    })
                    .collect();
                fft.process(&mut buf);
                channel_dfts.push(buf);
            }
            let mut flat = vec![Complex64::new(0.0, 0.0); bins * m * m];
            for k in 0..bins {
                for i in 0..m {
                    for j in 0..m {
                        flat[k * m * m + i + j * m] =
                            channel_dfts[i][k + 1] * channel_dfts[j][k + 1].conj();
                    }
                }
            }
            flat
        })
        .collect();

    let mut acc = vec![Complex64::new(0.0, 0.0); bins * m * m];
    for seg in &per_segment {
        for (a, b) in acc.iter_mut().zip(seg) {
            *a += b;
        }
    }
    let scale = path.dt / (weight_power * segments as f64);
    let freqs: Vec<f64> = (1..=bins)
        .map(|k| 2.0 * PI * k as f64 / (l as f64 * path.dt))
        .collect();
    let values: Vec<DMatrix<Complex64>> = (0..bins)
        .map(|k| {
            let raw = DMatrix::from_fn(m, m, |i, j| acc[k * m * m + i + j * m] * scale);
            (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    SpectralEstimate::new(freqs, values, segments, window.name().to_string(), path.dt)
}

/// Biased (1/N) empirical covariances `C_j = mean[(y_{k+j} - ȳ)(y_k - ȳ)ᵀ]`
/// for lags `0..=max_lag`, after global mean removal.
pub fn empirical_covariance(path: &SamplePath, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = path.len();
    if max_lag >= n.div_ceil(4) {
        return Err(Error::PathTooShort);
    }
    let m = path.value_dim();
    let mean = path_mean(path);
    let centered: Vec<DVector<f64>> = path.values.iter().map(|v| v - &mean).collect();
    let mut out = Vec::with_capacity(max_lag + 1);
    for j in 0..=max_lag {
        let mut c = DMatrix::<f64>::zeros(m, m);
        for k in 0..n - j {
            c.ger(1.0, &centered[k + j], &centered[k], 1.0);
        }
        out.push(c / n as f64);
    }
    Ok(out)
}

/// Normalized autocorrelations of a scalar sequence against the Gaussian
/// 3/√count band.
#[derive(Clone, Debug)]
pub struct WhitenessReport {
    pub lags: Vec<usize>,
    pub autocorrelations: Vec<f64>,
    pub band: f64,
    pub pass_fraction: f64,
}

impl WhitenessReport {
    pub fn pass(&self) -> bool {
        self.pass_fraction >= 0.99
    }
}

pub fn whiteness_test(sequence: &[f64], max_lag: usize) -> Result<WhitenessReport> {
    let n = sequence.len();
    if n < 1000 {
        return Err(Error::TooFewSamples {
            needed: 1000,
            got: n,
        });
    }
    if max_lag == 0 || max_lag > n / 4 {
        return Err(Error::InvalidArgument(
            "whiteness lags must be between 1 and a quarter of the sample count".into(),
        ));
    }
    let mean = sequence.iter().sum::<f64>() / n as f64;
    let c0 = sequence.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "whiteness test needs a sequence with positive variance".into(),
        ));
    }
    let band = 3.0 / (n as f64).sqrt();
    let mut lags = Vec::with_capacity(max_lag);
    let mut rhos = Vec::with_capacity(max_lag);
    let mut inside = 0usize;
    for j in 1..=max_lag {
        let cj = sequence[..n - j]
            .iter()
            .zip(&sequence[j..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64;
        let rho = cj / c0;
        if rho.abs() <= band {
            inside += 1;
        }
        lags.push(j);
        rhos.push(rho);
    }
    Ok(WhitenessReport {
        lags,
        autocorrelations: rhos,
        band,
        pass_fraction: inside as f64 / max_lag as f64,
    })
}

/// Least-squares line through the mean squared increment as a function of
/// `lag·dt`. For a Wiener path the slope estimates the increment variance
/// rate; a saturating curve shows up as a poor `r2`.
#[derive(Clone, Copy, Debug)]
pub struct IncrementFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn increment_variance_fit(path: &SamplePath, lags: &[usize]) -> Result<IncrementFit> {
    let n = path.len();
    if lags.len() < 2 {
        return Err(Error::InvalidArgument(
            "increment fit needs at least two distinct lags".into(),
        ));
    }
    if lags.iter().any(|&l| l == 0 || l >= n) {
        return Err(Error::PathTooShort);
    }
    let mut xs = Vec::with_capacity(lags.len());
    let mut ys = Vec::with_capacity(lags.len());
    for &lag in lags {
        let mut sum = 0.0;
        for k in 0..n - lag {
            sum += (&path.values[k + lag] - &path.values[k]).norm_squared();
        }
        xs.push(lag as f64 * path.dt);
        ys.push(sum / (n - lag) as f64);
    }
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument(
            "increment fit lags must not all coincide".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot <= f64::MIN_POSITIVE {
        if ss_res <= f64::MIN_POSITIVE {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(IncrementFit {
        slope,
        intercept,
        r2,
    })
}

/// Paley-Wiener diagnostic `∫ log Φ̂(λ) / (1+λ²) dλ`, evaluated through the
/// substitution `λ = tan θ` which absorbs the Cauchy weight.
#[derive(Clone, Copy, Debug)]
pub struct PndCheck {
    pub is_pnd: bool,
    pub paley_wiener_value: f64,
}

pub fn pnd_check(phi: &ScalarSpectralDensity) -> PndCheck {
    if phi.tf.is_zero() || !validate_density(phi).all_pass() {
        return PndCheck {
            is_pnd: false,
            paley_wiener_value: f64::NEG_INFINITY,
        };
    }
    let inset = 1e-10;
    let integrand = |theta: f64| phi.at(theta.tan()).max(1e-300).ln();
    let value = adaptive_simpson(
        &integrand,
        -PI / 2.0 + inset,
        PI / 2.0 - inset,
        1e-9,
    );
    PndCheck {
        is_pnd: value.is_finite(),
        paley_wiener_value: value,
    }
}

/// Differential entropy curve of the state law along `Ṗ = FP + PFᵀ + GGᵀ`,
/// computed in closed form as `P(t) = e^{Ft}(P0 - P)e^{Fᵀt} + P`.
#[derive(Clone, Debug)]
pub struct EntropyTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Entropy of the stationary law `N(0, P)`.
    pub stationary: f64,
}

impl EntropyTrajectory {
    /// True when successive values never drop by more than `slack`. A leading
    /// degenerate `-inf` (point-mass start) counts as nondecreasing.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| {
            if w[0] == f64::NEG_INFINITY {
                return true;
            }
            w[1] - w[0] >= -slack
        })
    }
}

fn gaussian_entropy(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    let eigs = p.clone().symmetric_eigen().eigenvalues;
    let mut log_det = 0.0;
    for &l in eigs.iter() {
        if l <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_det += l.ln();
    }
    0.5 * (n as f64 * (2.0 * PI * std::f64::consts::E).ln() + log_det)
}

pub fn entropy_trajectory(
    pair: &ForwardBackwardPair,
    p0: &DMatrix<f64>,
    times: &[f64],
) -> Result<EntropyTrajectory> {
    let n = pair.state_dim();
    if p0.nrows() != n || p0.ncols() != n {
        return Err(Error::dim(format!(
            "initial covariance is {}x{}, the model has {} states",
            p0.nrows(),
            p0.ncols(),
            n
        )));
    }
    let scale = p0.norm().max(1.0);
    if (p0 - p0.transpose()).norm() > 1e-10 * scale {
        return Err(Error::InvalidArgument(
            "initial covariance must be symmetric".into(),
        ));
    }
    let min_eig = p0
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -1e-10 * scale {
        return Err(Error::NotNonnegative);
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument(
            "entropy trajectory needs at least one time".into(),
        ));
    }
    for pair_t in times.windows(2) {
        if pair_t[1] <= pair_t[0] {
            return Err(Error::InvalidArgument(
                "entropy times must be strictly increasing".into(),
            ));
        }
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument(
            "entropy times must be finite and nonnegative".into(),
        ));
    }

    let diff = linalg::symmetrize(&(p0 - &pair.p));
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let e = linalg::expm(&(&pair.forward.f * t));
        let pt = linalg::symmetrize(&(&e * &diff * e.transpose() + &pair.p));
        values.push(gaussian_entropy(&pt));
    }
    Ok(EntropyTrajectory {
        times: times.to_vec(),
        values,
        stationary: gaussian_entropy(&pair.p),
    })
}
