//! Seeded path simulation: forward and backward diffusions by exact
//! discretization, the lossless-line scattering junction that reproduces the
//! forward diffusion statistically, and the integrated momentum observable of
//! the independent-particle bath.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::polyrat::{Polynomial, RationalFunction};
use crate::realization::{ForwardBackwardPair, StateSpaceModel};
use crate::rng;
use crate::tol::TOL_HURWITZ;

/// One simulated trajectory on a uniform time grid. `values` holds the output
/// samples; `states` is kept when the simulator exposes its internal state.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub dt: f64,
    pub values: Vec<DVector<f64>>,
    pub states: Option<Vec<DVector<f64>>>,
    pub seed: u64,
    pub meta: String,
}

impl SamplePath {
    pub fn new(
        dt: f64,
        values: Vec<DVector<f64>>,
        states: Option<Vec<DVector<f64>>>,
        seed: u64,
        meta: String,
    ) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::NonPositiveDt);
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "a sample path needs at least one sample".into(),
            ));
        }
        let m = values[0].len();
        for v in &values {
            if v.len() != m {
                return Err(Error::dim("sample path values must share one dimension"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(
                    "sample path values must be finite".into(),
                ));
            }
        }
        if let Some(xs) = &states {
            if xs.len() != values.len() {
                return Err(Error::dim(
                    "state trace must have one entry per output sample",
                ));
            }
            let n = xs.first().map_or(0, |x| x.len());
            for x in xs {
                if x.len() != n {
                    return Err(Error::dim("state trace entries must share one dimension"));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "state trace entries must be finite".into(),
                    ));
                }
            }
        }
        Ok(Self {
            dt,
            values,
            states,
            seed,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value_dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.len() - 1) as f64
    }

    /// One scalar coordinate of the output as a flat series.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }
}

/// How the anchor state of a path is chosen: the initial state of a forward
/// run, or the terminal state of a backward run.
#[derive(Clone, Debug)]
pub enum Anchor {
    /// Draw from the stationary law `N(0, P)`.
    Stationary,
    Zero,
    Given(DVector<f64>),
}

fn check_dt(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::NonPositiveDt);
    }
    Ok(())
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    Ok(())
}

/// One-step transition matrix and noise covariance for a stationary
/// Gauss-Markov generator `f` with state covariance `p` and diffusion
/// `q_cont`. The covariance is formed from stationarity as
/// `P - A_d P A_d^T` and cross-checked against the Van Loan integral.
fn exact_step(
    f: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q_cont: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a_d = linalg::expm(&(f * dt));
    let q_stat = linalg::symmetrize(&(p - &a_d * p * a_d.transpose()));
    let (_, q_vl) = linalg::van_loan(f, q_cont, dt);
    let gap = (&q_stat - &q_vl).norm();
    let scale = q_vl.norm().max(1.0);
    if gap > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "one-step noise covariance is inconsistent: stationary difference and \
             Van Loan integral differ by {:.3e} relative",
            gap / scale
        )));
    }
    Ok((a_d, q_stat))
}

fn draw_anchor(
    anchor: &Anchor,
    p: &DMatrix<f64>,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<DVector<f64>> {
    match anchor {
        Anchor::Stationary => Ok(linalg::psd_factor_clamped(p) * rng::normal_vector(rng, n)),
        Anchor::Zero => Ok(DVector::zeros(n)),
        Anchor::Given(v) => {
            if v.len() != n {
                return Err(Error::dim(format!(
                    "anchor state has length {}, the model has {} states",
                    v.len(),
                    n
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("anchor state must be finite".into()));
            }
            Ok(v.clone())
        }
    }
}

fn forward_path(
    pair: &ForwardBackwardPair,
    dt: f64,
    steps: usize,
    seed: u64,
    stream_index: u64,
    x0: &Anchor,
    meta: String,
) -> Result<SamplePath> {
    let fwd = &pair.forward;
    let n = fwd.state_dim();
    let q_cont = linalg::symmetrize(&(&fwd.g * fwd.g.transpose()));
    let (a_d, q_d) = exact_step(&fwd.f, &pair.p, &q_cont, dt)?;
    let noise = linalg::psd_factor_clamped(&q_d);

    let mut r = rng::stream(seed, stream_index);
    let mut x = draw_anchor(x0, &pair.p, n, &mut r)?;
    let mut values = Vec::with_capacity(steps);
    let mut states = Vec::with_capacity(steps);
    for _ in 0..steps {
        values.push(&fwd.h * &x);
        states.push(x.clone());
        x = &a_d * x + &noise * rng::normal_vector(&mut r, n);
    }
    SamplePath::new(dt, values, Some(states), seed, meta)
}

/// Samples the forward diffusion `dx = Fx dt + G dw` on the grid `k·dt` by
/// exact discretization: `x_{k+1} = A_d x_k + ε_k` with `A_d = e^{F·dt}` and
/// `Cov(ε_k) = P - A_d P A_d^T`, the outputs being `y_k = H x_k`.
pub fn simulate_forward(
    pair: &ForwardBackwardPair,
    dt: f64,
    steps: usize,
    seed: u64,
    x0: &Anchor,
) -> Result<SamplePath> {
    check_dt(dt)?;
    check_steps(steps)?;
    let n = pair.forward.state_dim();
    forward_path(pair, dt, steps, seed, 0, x0, format!("forward n={n}"))
}

/// Independent forward paths generated in parallel, one RNG substream per
/// path index, collected in path order.
pub fn forward_ensemble(
    pair: &ForwardBackwardPair,
    dt: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    x0: &Anchor,
) -> Result<Vec<SamplePath>> {
    check_dt(dt)?;
    check_steps(steps)?;
    if paths == 0 {
        return Err(Error::InvalidArgument(
            "an ensemble needs at least one path".into(),
        ));
    }
    let n = pair.forward.state_dim();
    (0..paths)
        .into_par_iter()
        .map(|k| {
            forward_path(
                pair,
                dt,
                steps,
                seed,
                k as u64,
                x0,
                format!("forward n={n} path {k}"),
            )
        })
        .collect()
}

/// Samples the backward representation `dx = F̄x dt + Ḡ dw̄`. The anti-stable
/// generator is never integrated forward; the path is generated in reversed
/// time, where `-F̄` is Hurwitz and shares the stationary covariance `P`,
/// starting from the terminal state and emitted in increasing-time order.
pub fn simulate_backward(
    pair: &ForwardBackwardPair,
    dt: f64,
    steps: usize,
    seed: u64,
    terminal: &Anchor,
) -> Result<SamplePath> {
    check_dt(dt)?;
    check_steps(steps)?;
    let bwd = &pair.backward;
    let n = bwd.state_dim();
    let reversed = -&bwd.f;
    let q_cont = linalg::symmetrize(&(&bwd.g * bwd.g.transpose()));
    let (a_d, q_d) = exact_step(&reversed, &pair.p, &q_cont, dt)?;
    let noise = linalg::psd_factor_clamped(&q_d);

    let mut r = rng::stream(seed, 0);
    let mut x = draw_anchor(terminal, &pair.p, n, &mut r)?;
    let mut values = Vec::with_capacity(steps);
    let mut states = Vec::with_capacity(steps);
    for _ in 0..steps {
        values.push(&bwd.h * &x);
        states.push(x.clone());
        x = &a_d * x + &noise * rng::normal_vector(&mut r, n);
    }
    values.reverse();
    states.reverse();
    SamplePath::new(dt, values, Some(states), seed, format!("backward n={n}"))
}

/// Configuration of the lossless-line scattering junction: a strictly proper
/// lossless load `(F0, G0, H0)` terminated on a semi-infinite line in thermal
/// equilibrium at inverse-variance parameter `beta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LineBathDto", into = "LineBathDto")]
pub struct LineBathConfig {
    load: StateSpaceModel,
    beta: f64,
    dt: f64,
    steps: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct LineBathDto {
    load: StateSpaceModel,
    beta: f64,
    dt: f64,
    steps: usize,
    seed: u64,
}

impl TryFrom<LineBathDto> for LineBathConfig {
    type Error = Error;

    fn try_from(dto: LineBathDto) -> Result<Self> {
        Self::new(dto.load, dto.beta, dto.dt, dto.steps, dto.seed)
    }
}

impl From<LineBathConfig> for LineBathDto {
    fn from(cfg: LineBathConfig) -> Self {
        Self {
            load: cfg.load,
            beta: cfg.beta,
            dt: cfg.dt,
            steps: cfg.steps,
            seed: cfg.seed,
        }
    }
}

impl LineBathConfig {
    pub fn new(
        load: StateSpaceModel,
        beta: f64,
        dt: f64,
        steps: usize,
        seed: u64,
    ) -> Result<Self> {
        check_dt(dt)?;
        check_steps(steps)?;
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(
                "beta must be finite and nonnegative".into(),
            ));
        }
        if load.noise_dim() != 1 || load.output_dim() != 1 {
            return Err(Error::dim(
                "the junction load must be a one-port: single input, single output",
            ));
        }
        if load.state_dim() == 0 {
            return Err(Error::dim("the junction load must have at least one state"));
        }
        let eigs = linalg::eigenvalues(&load.f)?;
        let off_axis = eigs.iter().map(|e| e.re.abs()).fold(0.0f64, f64::max);
        if off_axis > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "the load generator must be lossless; its spectrum sits {off_axis:.3e} \
                 off the imaginary axis"
            )));
        }
        Ok(Self {
            load,
            beta,
            dt,
            steps,
            seed,
        })
    }

    pub fn load(&self) -> &StateSpaceModel {
        &self.load
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// What the junction run certifies about itself.
#[derive(Clone, Debug)]
pub struct LineBathReport {
    /// Spectrum of the closed-loop generator `F0 - G0 H0`.
    pub closed_loop_eigenvalues: Vec<Complex64>,
    /// Analytic transfer from the incident wave to the output, `2Z0/(1+Z0)`.
    pub closed_loop: RationalFunction,
    /// Reflected wave samples `b'_k = a'_k - y_k` sent back into the line.
    pub reflected: Vec<f64>,
    /// Largest relative gap between the wave power `|a'|^2 - |b'|^2` and the
    /// load's internal energy rate, over all steps.
    pub energy_residual: f64,
}

/// Storage matrix of a lossless one-port: the symmetric `Q` with
/// `F^T Q + Q F = 0` and `Q G = H^T`, so that the stored energy
/// `x^T Q x / 2` changes exactly at the absorbed power `u·y`.
fn lossless_storage(model: &StateSpaceModel) -> Result<DMatrix<f64>> {
    let n = model.state_dim();
    let f = &model.f;
    let idx = |i: usize, j: usize| i + j * n;
    let rows = n * n + n * (n - 1) / 2 + n;
    let mut a = DMatrix::<f64>::zeros(rows, n * n);
    let mut rhs = DVector::<f64>::zeros(rows);
    let mut row = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                a[(row, idx(k, j))] += f[(k, i)];
                a[(row, idx(i, k))] += f[(k, j)];
            }
            row += 1;
        }
    }
    for i in 0..n {
        for k in 0..n {
            a[(row, idx(i, k))] += model.g[(k, 0)];
        }
        rhs[row] = model.h[(0, i)];
        row += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            a[(row, idx(i, j))] = 1.0;
            a[(row, idx(j, i))] = -1.0;
            row += 1;
        }
    }

    let svd = a.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(format!("storage matrix solve failed: {e}")))?;
    let q = linalg::symmetrize(&DMatrix::from_fn(n, n, |i, j| sol[idx(i, j)]));

    let scale = q.norm().max(1.0);
    let lyap_gap = (f.transpose() * &q + &q * f).norm();
    let gain_gap = (&q * &model.g - model.h.transpose()).norm();
    if lyap_gap > 1e-8 * scale || gain_gap > 1e-8 * model.h.norm().max(1.0) {
        return Err(Error::Numerical(
            "the load admits no lossless storage matrix; its impedance is not \
             positive real"
                .into(),
        ));
    }
    Ok(q)
}

/// Runs the scattering junction: the load driven through `u = 2a' - y` by an
/// incident wave stream `a'_k ~ N(0, beta/(2·dt))` i.i.d., with the reflected
/// wave `b' = a' - y` returned to the line. The state moves by the exact
/// zero-order-hold discretization of `ẋ = (F0 - G0H0)x + 2G0 a'` and starts
/// in the stationary law of that closed loop.
pub fn simulate_line_bath(cfg: &LineBathConfig) -> Result<(SamplePath, LineBathReport)> {
    let load = &cfg.load;
    if load.d.iter().any(|v| *v != 0.0) {
        return Err(Error::AlgebraicLoop);
    }
    let n = load.state_dim();
    let f_cl = &load.f - &load.g * &load.h;
    let eigs = linalg::eigenvalues(&f_cl)?;
    let abscissa = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa > -TOL_HURWITZ {
        return Err(Error::UnstableClosedLoop);
    }

    let q_storage = lossless_storage(load)?;

    let (chi, adj) = linalg::leverrier(&load.f);
    let mut num_coeffs = vec![0.0; n];
    for (k, b_k) in adj.iter().enumerate() {
        num_coeffs[k] = (&load.h * b_k * &load.g)[(0, 0)];
    }
    let num = Polynomial::new(num_coeffs);
    let closed = RationalFunction::new(num.scale(2.0), chi.add(&num))?;

    let intensity = cfg.beta / (2.0 * cfg.dt);
    let q_in = linalg::symmetrize(&(&load.g * load.g.transpose() * (2.0 * cfg.beta)));
    let p_cl = linalg::solve_lyapunov(&f_cl, &q_in)?;
    let (a_cl, b_cl) = linalg::integrate_exp(&f_cl, &(&load.g * 2.0), cfg.dt);
    let b_col: DVector<f64> = b_cl.column(0).into_owned();

    let qf = &q_storage * &f_cl;
    let qg: DVector<f64> = (&q_storage * &load.g).column(0).into_owned();

    let mut r = rng::stream(cfg.seed, 0);
    let mut x = linalg::psd_factor_clamped(&p_cl) * rng::normal_vector(&mut r, n);
    let sd_in = intensity.sqrt();

    let mut values = Vec::with_capacity(cfg.steps);
    let mut reflected = Vec::with_capacity(cfg.steps);
    let mut worst_gap = 0.0f64;
    let mut power_scale = 0.0f64;
    for _ in 0..cfg.steps {
        let y = (&load.h * &x)[(0, 0)];
        let a_in = sd_in * rng::normal_vector(&mut r, 1)[0];
        let b_out = a_in - y;
        values.push(DVector::from_element(1, y));
        reflected.push(b_out);

        let power = a_in * a_in - b_out * b_out;
        let rate = x.dot(&(&qf * &x)) + 2.0 * a_in * qg.dot(&x);
        worst_gap = worst_gap.max((power - rate).abs());
        power_scale = power_scale.max(power.abs()).max(rate.abs());

        x = &a_cl * x + &b_col * a_in;
    }
    let energy_residual = worst_gap / power_scale.max(1.0);

    let path = SamplePath::new(
        cfg.dt,
        values,
        None,
        cfg.seed,
        format!("line-bath n={n}"),
    )?;
    let report = LineBathReport {
        closed_loop_eigenvalues: eigs,
        closed_loop: closed,
        reflected,
        energy_residual,
    };
    Ok((path, report))
}

/// Integrated momentum observable of the independent-particle bath with unit
/// frequencies: `w(t) = ∫⟨c, p(s)⟩ ds`. Under the invariant measure the
/// momentum field is white in time, so each step consumes a fresh equilibrium
/// momentum draw at variance `beta/dt`, which gives the integral exact
/// independent Gaussian increments of variance `beta·‖c‖²·dt`.
pub fn simulate_wiener_observable(
    particles: usize,
    beta: f64,
    c: &DVector<f64>,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<SamplePath> {
    check_dt(dt)?;
    check_steps(steps)?;
    if particles == 0 || c.len() != particles {
        return Err(Error::dim(format!(
            "direction has length {}, the bath has {} particles",
            c.len(),
            particles
        )));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidArgument(
            "beta must be finite and nonnegative".into(),
        ));
    }
    if c.iter().any(|v| !v.is_finite()) || c.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }

    let scale = (beta / dt).sqrt();
    let mut r = rng::stream(seed, 0);
    let mut w = 0.0f64;
    let mut values = Vec::with_capacity(steps);
    values.push(DVector::from_element(1, 0.0));
    for _ in 1..steps {
        let p = rng::normal_vector(&mut r, particles) * scale;
        w += c.dot(&p) * dt;
        values.push(DVector::from_element(1, w));
    }
    SamplePath::new(dt, values, None, seed, format!("wiener N={particles}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lossless::{k_to_z0, load_state_space, LosslessImpedance};
    use crate::realization::{build_pair, covariance_function, inner_from_char_poly};
    use crate::synth;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn ou_pair() -> ForwardBackwardPair {
        let model = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 2.0f64.sqrt()),
            DMatrix::from_element(1, 1, 1.0),
            None,
        )
        .unwrap();
        build_pair(&model).unwrap()
    }

    fn lag_cov(xs: &[f64], j: usize) -> f64 {
        let k = xs.len() - j;
        xs[..k].iter().zip(&xs[j..]).map(|(a, b)| a * b).sum::<f64>() / k as f64
    }

    /// Large-sample variance of the lag-`j` covariance estimator of a
    /// mean-zero Gaussian series with autocovariance `lam(|m|)`.
    fn bartlett_variance(lam: &dyn Fn(usize) -> f64, j: usize, count: usize) -> f64 {
        let cutoff = 4000i64;
        let mut s = 0.0;
        for m in -cutoff..=cutoff {
            let lm = lam(m.unsigned_abs() as usize);
            let lpj = lam((m + j as i64).unsigned_abs() as usize);
            let lmj = lam((m - j as i64).unsigned_abs() as usize);
            s += lm * lm + lpj * lmj;
        }
        s / count as f64
    }

    fn spectra_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let mut free: Vec<Complex64> = b.to_vec();
        let mut worst = 0.0f64;
        for e in a {
            let (i, d) = free
                .iter()
                .enumerate()
                .map(|(i, r)| (i, (e - r).norm()))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            worst = worst.max(d);
            free.swap_remove(i);
        }
        worst
    }

    #[test]
    fn sample_path_validates_inputs() {
        let v = vec![DVector::from_element(1, 0.0)];
        assert!(matches!(
            SamplePath::new(0.0, v.clone(), None, 0, String::new()),
            Err(Error::NonPositiveDt)
        ));
        assert!(SamplePath::new(0.1, vec![], None, 0, String::new()).is_err());
        let ragged = vec![DVector::zeros(1), DVector::zeros(2)];
        assert!(SamplePath::new(0.1, ragged, None, 0, String::new()).is_err());
        let short_states = Some(vec![DVector::zeros(1)]);
        let two = vec![DVector::zeros(1), DVector::zeros(1)];
        assert!(SamplePath::new(0.1, two, short_states, 0, String::new()).is_err());
    }

    #[test]
    fn noiseless_forward_path_is_the_matrix_exponential_decay() {
        let forward = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -0.5),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            None,
        )
        .unwrap();
        let backward = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            None,
        )
        .unwrap();
        let pair = ForwardBackwardPair {
            forward,
            p: DMatrix::zeros(1, 1),
            backward,
        };
        let x0 = Anchor::Given(DVector::from_element(1, 2.0));
        let a = simulate_forward(&pair, 0.05, 200, 51, &x0).unwrap();
        let b = simulate_forward(&pair, 0.05, 200, 777, &x0).unwrap();
        for (k, v) in a.values.iter().enumerate() {
            let want = 2.0 * (-0.5 * 0.05 * k as f64).exp();
            assert_relative_eq!(v[0], want, max_relative = 1e-12);
        }
        for (u, v) in a.values.iter().zip(&b.values) {
            assert_eq!(u[0].to_bits(), v[0].to_bits());
        }
    }

    #[test]
    fn noiseless_backward_path_decays_toward_the_terminal_state() {
        let forward = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -0.5),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            None,
        )
        .unwrap();
        let backward = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            None,
        )
        .unwrap();
        let pair = ForwardBackwardPair {
            forward,
            p: DMatrix::zeros(1, 1),
            backward,
        };
        let steps = 120;
        let path = simulate_backward(
            &pair,
            0.1,
            steps,
            51,
            &Anchor::Given(DVector::from_element(1, 2.0)),
        )
        .unwrap();
        assert_relative_eq!(path.values[steps - 1][0], 2.0, max_relative = 1e-12);
        for (k, v) in path.values.iter().enumerate() {
            let want = 2.0 * (0.5 * 0.1 * (k as f64 - (steps - 1) as f64)).exp();
            assert_relative_eq!(v[0], want, max_relative = 1e-11);
        }
    }

    #[test]
    fn ou_variance_and_lag_one_autocorrelation_sit_in_their_bands() {
        let pair = ou_pair();
        let dt = 0.01;
        let steps = 1_000_000;
        let path = simulate_forward(&pair, dt, steps, 51, &Anchor::Stationary).unwrap();
        let ys = path.component(0);

        let lam = |m: usize| (-(m as f64) * dt).exp();
        let vhat = lag_cov(&ys, 0);
        let band0 = 3.0 * bartlett_variance(&lam, 0, steps).sqrt();
        assert!(
            (vhat - 1.0).abs() <= band0,
            "variance {vhat} outside 1 ± {band0}"
        );

        let c1 = lag_cov(&ys, 1);
        let want = covariance_function(&pair, dt).unwrap()[(0, 0)];
        assert_relative_eq!(want, (-dt).exp(), max_relative = 1e-12);
        let band1 = 3.0 * bartlett_variance(&lam, 1, steps).sqrt();
        assert!(
            (c1 - want).abs() <= band1,
            "lag-1 covariance {c1} outside {want} ± {band1}"
        );
    }

    #[test]
    fn backward_and_forward_lag_covariances_agree() {
        let pair = ou_pair();
        let dt = 0.1;
        let steps = 200_000;
        let fwd = simulate_forward(&pair, dt, steps, 52, &Anchor::Stationary).unwrap();
        let bwd = simulate_backward(&pair, dt, steps, 53, &Anchor::Stationary).unwrap();
        let yf = fwd.component(0);
        let yb = bwd.component(0);

        let lam = |m: usize| (-(m as f64) * dt).exp();
        for j in 0..=20 {
            let cf = lag_cov(&yf, j);
            let cb = lag_cov(&yb, j);
            let want = covariance_function(&pair, j as f64 * dt).unwrap()[(0, 0)];
            let sd = bartlett_variance(&lam, j, steps).sqrt();
            assert!(
                (cf - want).abs() <= 3.0 * sd,
                "forward lag {j}: {cf} vs {want} ± {:.4}",
                3.0 * sd
            );
            assert!(
                (cb - want).abs() <= 3.0 * sd,
                "backward lag {j}: {cb} vs {want} ± {:.4}",
                3.0 * sd
            );
            let cross_band = 3.0 * (2.0f64).sqrt() * sd;
            assert!(
                (cf - cb).abs() <= cross_band,
                "lag {j}: forward {cf} vs backward {cb} ± {cross_band:.4}"
            );
        }
    }

    #[test]
    fn stationary_difference_matches_van_loan_for_random_pairs() {
        let mut r = rng::stream(54, 0);
        for _ in 0..20 {
            let model = synth::random_controllable_model(&mut r, 8);
            let pair = build_pair(&model).unwrap();
            for &dt in &[1e-3, 1e-1] {
                let q_cont =
                    linalg::symmetrize(&(&pair.forward.g * pair.forward.g.transpose()));
                let (a_d, q_d) = exact_step(&pair.forward.f, &pair.p, &q_cont, dt).unwrap();
                let (_, q_vl) = linalg::van_loan(&pair.forward.f, &q_cont, dt);
                let gap = (&q_d - &q_vl).norm() / q_vl.norm().max(1.0);
                assert!(gap <= 1e-9, "covariance gap {gap} at dt={dt}");
                assert_eq!(a_d.nrows(), pair.state_dim());
            }
        }
    }

    #[test]
    fn ensembles_are_bitwise_identical_across_thread_counts() {
        let pair = ou_pair();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    forward_ensemble(&pair, 0.02, 10_000, 6, 55, &Anchor::Stationary).unwrap()
                })
        };
        let one = run(1);
        let eight = run(8);
        assert_eq!(one.len(), eight.len());
        for (pa, pb) in one.iter().zip(&eight) {
            for (u, v) in pa.values.iter().zip(&pb.values) {
                assert_eq!(u[0].to_bits(), v[0].to_bits());
            }
        }
        let single = simulate_forward(&pair, 0.02, 10_000, 55, &Anchor::Stationary).unwrap();
        for (u, v) in single.values.iter().zip(&one[0].values) {
            assert_eq!(u[0].to_bits(), v[0].to_bits());
        }
    }

    #[test]
    fn line_bath_integrator_load_reproduces_the_first_order_loop() {
        let z0 = LosslessImpedance {
            tf: RationalFunction::new(Polynomial::one(), Polynomial::s()).unwrap(),
        };
        let load = load_state_space(&z0).unwrap();
        let cfg = LineBathConfig::new(load, 1.0, 0.01, 4000, 56).unwrap();
        let (path, report) = simulate_line_bath(&cfg).unwrap();
        assert_eq!(path.len(), 4000);
        assert_eq!(report.closed_loop_eigenvalues.len(), 1);
        assert_abs_diff_eq!(
            report.closed_loop_eigenvalues[0].re,
            -1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(report.closed_loop_eigenvalues[0].im, 0.0, epsilon = 1e-12);
        assert_eq!(report.closed_loop.den().coeffs(), &[1.0, 1.0]);
        assert_eq!(report.closed_loop.num().coeffs(), &[2.0]);
        assert!(report.energy_residual <= 1e-6);
        assert_eq!(report.reflected.len(), 4000);
    }

    #[test]
    fn line_bath_resonant_load_has_the_predicted_char_poly() {
        let z0 = LosslessImpedance {
            tf: RationalFunction::new(
                Polynomial::s(),
                Polynomial::new(vec![1.0, 0.0, 1.0]),
            )
            .unwrap(),
        };
        let load = load_state_space(&z0).unwrap();
        let f_cl = &load.f - &load.g * &load.h;
        let chi_cl = linalg::leverrier(&f_cl).0;
        for (have, want) in chi_cl.coeffs().iter().zip(&[1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(have, want, epsilon = 1e-12);
        }

        let cfg = LineBathConfig::new(load, 0.5, 0.02, 2000, 57).unwrap();
        let (_, report) = simulate_line_bath(&cfg).unwrap();
        let roots = Polynomial::new(vec![1.0, 1.0, 1.0]).roots().unwrap();
        assert!(spectra_gap(&report.closed_loop_eigenvalues, &roots) <= 1e-7);
        assert!(report.energy_residual <= 1e-6);
    }

    #[test]
    fn line_bath_zero_temperature_is_silent() {
        let z0 = LosslessImpedance {
            tf: RationalFunction::new(Polynomial::one(), Polynomial::s()).unwrap(),
        };
        let load = load_state_space(&z0).unwrap();
        let cfg = LineBathConfig::new(load, 0.0, 0.05, 500, 57).unwrap();
        let (path, report) = simulate_line_bath(&cfg).unwrap();
        assert!(path.values.iter().all(|v| v[0] == 0.0));
        assert!(report.reflected.iter().all(|b| *b == 0.0));
        assert_eq!(report.energy_residual, 0.0);
    }

    #[test]
    fn line_bath_energy_bookkeeping_is_machine_tight() {
        let chi = Polynomial::new(vec![1.0, 2.0, 2.0, 1.0]);
        let k = inner_from_char_poly(&chi).unwrap();
        let z0 = k_to_z0(&k).unwrap();
        let load = load_state_space(&z0).unwrap();
        let cfg = LineBathConfig::new(load, 1.5, 0.02, 20_000, 58).unwrap();
        let (_, report) = simulate_line_bath(&cfg).unwrap();
        assert!(
            report.energy_residual <= 1e-6,
            "energy residual {}",
            report.energy_residual
        );
        let chi_roots = chi.roots().unwrap();
        assert!(
            spectra_gap(&report.closed_loop_eigenvalues, &chi_roots) <= 1e-7,
            "closed loop spectrum strays from the char poly roots"
        );
    }

    #[test]
    fn line_bath_rejects_feedthrough_and_unstable_loops() {
        let with_d = StateSpaceModel::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            Some(DMatrix::from_element(1, 1, 1.0)),
        )
        .unwrap();
        let cfg = LineBathConfig::new(with_d, 1.0, 0.1, 10, 0).unwrap();
        assert!(matches!(
            simulate_line_bath(&cfg),
            Err(Error::AlgebraicLoop)
        ));

        let flipped = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            None,
        )
        .unwrap();
        let cfg = LineBathConfig::new(flipped, 1.0, 0.1, 10, 0).unwrap();
        assert!(matches!(
            simulate_line_bath(&cfg),
            Err(Error::UnstableClosedLoop)
        ));
    }

    #[test]
    fn line_bath_config_validation() {
        let z0 = LosslessImpedance {
            tf: RationalFunction::new(Polynomial::one(), Polynomial::s()).unwrap(),
        };
        let load = load_state_space(&z0).unwrap();
        assert!(matches!(
            LineBathConfig::new(load.clone(), 1.0, 0.0, 10, 0),
            Err(Error::NonPositiveDt)
        ));
        assert!(LineBathConfig::new(load.clone(), -1.0, 0.1, 10, 0).is_err());
        assert!(LineBathConfig::new(load, 1.0, 0.1, 0, 0).is_err());

        let damped = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            None,
        )
        .unwrap();
        assert!(LineBathConfig::new(damped, 1.0, 0.1, 10, 0).is_err());
    }

    #[test]
    fn line_bath_config_serde_round_trip() {
        let z0 = LosslessImpedance {
            tf: RationalFunction::new(
                Polynomial::s(),
                Polynomial::new(vec![1.0, 0.0, 1.0]),
            )
            .unwrap(),
        };
        let load = load_state_space(&z0).unwrap();
        let cfg = LineBathConfig::new(load, 2.0, 0.05, 300, 99).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: LineBathConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.beta(), 2.0);
        assert_eq!(back.steps(), 300);
        assert_eq!(back.load().f, cfg.load().f);
    }

    fn nonoverlapping_increment_variance(w: &[f64], lag: usize) -> (f64, usize) {
        let mut sum = 0.0;
        let mut count = 0;
        let mut k = 0;
        while k + lag < w.len() {
            let d = w[k + lag] - w[k];
            sum += d * d;
            count += 1;
            k += lag;
        }
        (sum / count as f64, count)
    }

    #[test]
    fn wiener_increment_variance_slope_matches_the_temperature() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let beta = 0.8;
        let dt = 0.02;
        let path = simulate_wiener_observable(3, beta, &c, dt, 200_000, 59).unwrap();
        let w = path.component(0);

        let lags = [1usize, 2, 4, 8];
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut points = Vec::new();
        for &lag in &lags {
            let (var, _) = nonoverlapping_increment_variance(&w, lag);
            let tau = lag as f64 * dt;
            sxy += tau * var;
            sxx += tau * tau;
            points.push((tau, var));
        }
        let slope = sxy / sxx;
        let want = beta * c.norm_squared();
        assert_relative_eq!(slope, want, max_relative = 0.05);

        let ss_res: f64 = points
            .iter()
            .map(|(tau, var)| (var - slope * tau).powi(2))
            .sum();
        let ss_tot: f64 = points.iter().map(|(_, var)| var * var).sum();
        assert!(1.0 - ss_res / ss_tot >= 0.999);
    }

    #[test]
    fn wiener_slope_quadruples_when_the_direction_doubles() {
        let c = DVector::from_vec(vec![0.3, 1.1]);
        let doubled = &c * 2.0;
        let a = simulate_wiener_observable(2, 1.0, &c, 0.05, 50_000, 59).unwrap();
        let b = simulate_wiener_observable(2, 1.0, &doubled, 0.05, 50_000, 59).unwrap();
        let (va, _) = nonoverlapping_increment_variance(&a.component(0), 4);
        let (vb, _) = nonoverlapping_increment_variance(&b.component(0), 4);
        assert_relative_eq!(vb / va, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn wiener_disjoint_increments_are_uncorrelated() {
        let c = DVector::from_vec(vec![1.0]);
        let path = simulate_wiener_observable(1, 1.0, &c, 0.01, 100_000, 60).unwrap();
        let w = path.component(0);
        let lag = 5;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut k = 0;
        while k + 2 * lag < w.len() {
            xs.push(w[k + lag] - w[k]);
            ys.push(w[k + 2 * lag] - w[k + lag]);
            k += 2 * lag;
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut cxy = 0.0;
        let mut cxx = 0.0;
        let mut cyy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            cxy += (x - mx) * (y - my);
            cxx += (x - mx) * (x - mx);
            cyy += (y - my) * (y - my);
        }
        let rho = cxy / (cxx * cyy).sqrt();
        assert!(rho.abs() <= 3.0 / n.sqrt(), "correlation {rho}");
    }

    #[test]
    fn wiener_rejects_zero_direction_and_mismatched_length() {
        let zero = DVector::zeros(2);
        assert!(matches!(
            simulate_wiener_observable(2, 1.0, &zero, 0.1, 10, 0),
            Err(Error::ZeroDirection)
        ));
        let c = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            simulate_wiener_observable(3, 1.0, &c, 0.1, 10, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn anchor_and_argument_validation() {
        let pair = ou_pair();
        let bad = Anchor::Given(DVector::zeros(2));
        assert!(matches!(
            simulate_forward(&pair, 0.1, 10, 0, &bad),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            simulate_forward(&pair, -0.1, 10, 0, &Anchor::Zero),
            Err(Error::NonPositiveDt)
        ));
        assert!(simulate_forward(&pair, 0.1, 0, 0, &Anchor::Zero).is_err());
        assert!(matches!(
            simulate_backward(&pair, 0.0, 10, 0, &Anchor::Zero),
            Err(Error::NonPositiveDt)
        ));
        assert!(forward_ensemble(&pair, 0.1, 10, 0, 0, &Anchor::Zero).is_err());
    }
}
