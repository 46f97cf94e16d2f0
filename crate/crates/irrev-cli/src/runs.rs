//! Sampling and measurement subcommands: seeded trajectory CSVs with their
//! metadata sidecars, Welch spectra, the scattering-junction run, and the
//! umbrella verification table.

use serde::{Deserialize, Serialize};

use crate::fsio::{self, Manifest};
use crate::stages::{LosslessArtifact, PairArtifact};
use crate::{
    resolve_seed, BathsimArgs, CliResult, EstimateArgs, Failure, SimulateArgs, VerifyArgs,
};
use irrev::estimate::{self, SpectralEstimate, Window};
use irrev::polyrat::RationalFunction;
use irrev::simulate::{self, Anchor, LineBathConfig};
use irrev::spectral::ScalarSpectralDensity;
use irrev::verify;

fn model_hash<T: Serialize>(model: &T) -> CliResult<String> {
    let text = serde_json::to_string(model)
        .map_err(|e| Failure::Io(format!("hashing model: {e}")))?;
    Ok(fsio::sha256_hex(text.as_bytes()))
}

/// Largest power-of-two segment that still leaves Welch a healthy average,
/// capped at the library default.
fn auto_segment(samples: usize) -> CliResult<usize> {
    let budget = samples / 8;
    let mut segment = 8usize;
    while segment * 2 <= budget && segment * 2 <= estimate::DEFAULT_SEGMENT_LENGTH {
        segment *= 2;
    }
    if budget < 8 {
        return Err(Failure::Domain(format!(
            "path has {samples} samples; spectral estimation needs at least 64"
        )));
    }
    Ok(segment)
}

/// Comparison band for an estimate against an analytic density: the sampled
/// spectrum bends away from the continuous one near Nyquist, so the band is
/// capped at a tenth of it.
fn comparison_band(est: &SpectralEstimate) -> (f64, f64) {
    let lo = est.freqs[0];
    let hi_cap = 0.1 * std::f64::consts::PI / est.dt;
    let hi = est.freqs.last().copied().unwrap_or(lo).min(hi_cap);
    if hi > lo {
        (lo, hi)
    } else {
        (est.freqs[0], *est.freqs.last().unwrap())
    }
}

fn psd_csv(est: &SpectralEstimate) -> CliResult<String> {
    let values = est.scalar_values().map_err(Failure::from)?;
    let mut out = String::from("lambda,value\n");
    for (freq, value) in est.freqs.iter().zip(&values) {
        out.push_str(&fsio::fmt_f64(*freq));
        out.push(',');
        out.push_str(&fsio::fmt_f64(*value));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PathMeta {
    config: PathConfig,
    seed: u64,
    model_hash: String,
}

#[derive(Serialize, Deserialize)]
struct PathConfig {
    input: String,
    representation: String,
    dt: f64,
    steps: usize,
    state_dim: usize,
    output_dim: usize,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    fsio::ensure_dir(&args.out_dir)?;
    let seed = resolve_seed(args.seed)?;
    let mut manifest = Manifest::new("simulate", &args.out_dir).with_input(&args.input);
    manifest.dt = Some(args.dt);
    manifest.steps = Some(args.steps);
    manifest.seed = Some(seed);
    manifest.write(&args.out_dir)?;

    let artifact: PairArtifact = fsio::read_json(&args.input)?;
    let path = simulate::simulate_forward(&artifact.pair, args.dt, args.steps, seed, &Anchor::Stationary)?;
    fsio::write_string(&args.out_dir.join("path.csv"), &fsio::path_to_csv(&path))?;

    let meta = PathMeta {
        config: PathConfig {
            input: args.input.display().to_string(),
            representation: "forward-stationary".into(),
            dt: args.dt,
            steps: args.steps,
            state_dim: artifact.pair.state_dim(),
            output_dim: artifact.pair.forward.output_dim(),
        },
        seed,
        model_hash: model_hash(&artifact.pair)?,
    };
    fsio::write_json(&args.out_dir.join("path_meta.json"), &meta)
}

#[derive(Serialize)]
struct BathReport {
    closed_loop_eigenvalues: Vec<(f64, f64)>,
    closed_loop: RationalFunction,
    energy_residual: f64,
    psd_rel_l1_vs_analytic: f64,
    psd_band: (f64, f64),
    segment_length: usize,
    segments: usize,
    beta: f64,
    dt: f64,
    steps: usize,
    seed: u64,
    model_hash: String,
}

pub fn cmd_bathsim(args: &BathsimArgs) -> CliResult<()> {
    fsio::ensure_dir(&args.out_dir)?;
    let seed = resolve_seed(args.seed)?;
    let mut manifest = Manifest::new("bathsim", &args.out_dir).with_input(&args.input);
    manifest.dt = Some(args.dt);
    manifest.steps = Some(args.steps);
    manifest.seed = Some(seed);
    manifest.beta = Some(args.beta);
    manifest.write(&args.out_dir)?;

    let artifact: LosslessArtifact = fsio::read_json(&args.input)?;
    let hash = model_hash(&artifact.load)?;
    let cfg = LineBathConfig::new(artifact.load, args.beta, args.dt, args.steps, seed)?;
    let (path, report) = simulate::simulate_line_bath(&cfg)?;
    fsio::write_string(&args.out_dir.join("bath_path.csv"), &fsio::path_to_csv(&path))?;

    let segment = auto_segment(path.len())?;
    let est = estimate::welch_psd(&path, segment, estimate::DEFAULT_OVERLAP, Window::Hann)?;
    fsio::write_string(&args.out_dir.join("bath_psd.csv"), &psd_csv(&est)?)?;

    let (lo, hi) = comparison_band(&est);
    let closed = report.closed_loop.clone();
    let beta = args.beta;
    let l1 = est.l1_relative_error(|l| 0.5 * beta * closed.abs2_on_axis(l), lo, hi)?;

    let energy_residual = report.energy_residual;
    let bath_report = BathReport {
        closed_loop_eigenvalues: report
            .closed_loop_eigenvalues
            .iter()
            .map(|e| (e.re, e.im))
            .collect(),
        closed_loop: report.closed_loop,
        energy_residual,
        psd_rel_l1_vs_analytic: l1,
        psd_band: (lo, hi),
        segment_length: segment,
        segments: est.segment_count,
        beta: args.beta,
        dt: args.dt,
        steps: args.steps,
        seed,
        model_hash: hash,
    };
    fsio::write_json(&args.out_dir.join("bath_report.json"), &bath_report)?;
    if energy_residual > 1e-6 {
        return Err(Failure::Verification(format!(
            "bath_report.json: wave power and stored-energy rate disagree by {energy_residual:.3e} relative"
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct EstimateMeta {
    window: String,
    segment_length: usize,
    segments: usize,
    overlap: f64,
    band: (f64, f64),
    dt: f64,
    reference: Option<String>,
    error_vs_reference: Option<f64>,
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    fsio::ensure_dir(&args.out_dir)?;
    let mut manifest = Manifest::new("estimate", &args.out_dir).with_input(&args.input);
    manifest.reference = args.reference.as_ref().map(|p| p.display().to_string());

    let path = fsio::path_from_csv(&args.input)?;
    if path.value_dim() != 1 {
        return Err(Failure::Domain(format!(
            "spectral estimation expects a single output channel, the path has {}",
            path.value_dim()
        )));
    }
    let segment = auto_segment(path.len())?;
    manifest.segment_length = Some(segment);
    manifest.write(&args.out_dir)?;

    let est = estimate::welch_psd(&path, segment, estimate::DEFAULT_OVERLAP, Window::Hann)?;
    fsio::write_string(&args.out_dir.join("psd.csv"), &psd_csv(&est)?)?;

    let (lo, hi) = comparison_band(&est);
    let error_vs_reference = match &args.reference {
        Some(reference) => {
            let density: ScalarSpectralDensity = fsio::read_json(reference)?;
            Some(est.l1_relative_error(|l| density.at(l), lo, hi)?)
        }
        None => None,
    };
    let meta = EstimateMeta {
        window: est.window.clone(),
        segment_length: segment,
        segments: est.segment_count,
        overlap: estimate::DEFAULT_OVERLAP,
        band: (lo, hi),
        dt: est.dt,
        reference: args.reference.as_ref().map(|p| p.display().to_string()),
        error_vs_reference,
    };
    fsio::write_json(&args.out_dir.join("psd_meta.json"), &meta)
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    fsio::ensure_dir(&args.out_dir)?;
    let seed = resolve_seed(args.seed)?;
    let mut manifest = Manifest::new("verify", &args.out_dir);
    manifest.seed = Some(seed);
    manifest.quick = Some(args.quick);
    manifest.write(&args.out_dir)?;

    let summary = verify::run_all(seed, args.quick);
    for line in summary.lines() {
        println!("{line}");
    }
    fsio::write_json(&args.out_dir.join("verification.json"), &summary)?;

    let failed = summary.results.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Verification(format!(
            "{failed} of {} criteria failed",
            summary.results.len()
        )));
    }
    println!("all {} criteria pass", summary.results.len());
    Ok(())
}
