//! The construction chain: each stage reads the previous artifact, computes
//! the next object, embeds a verification block, and writes one JSON file.
//! `pipeline` runs all six in memory.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fsio::{self, Manifest};
use crate::{CliResult, Failure, StageArgs};
use irrev::grid;
use irrev::lossless::{self, FosterForm, FosterReport, LosslessImpedance};
use irrev::polyrat::{Polynomial, RationalFunction};
use irrev::realization::{
    self, ForwardBackwardPair, InnerFunction, StateSpaceModel,
};
use irrev::spectral::{self, Report, ScalarSpectralDensity};

pub const FACTOR_FILE: &str = "factor.json";
pub const MODEL_FILE: &str = "model.json";
pub const PAIR_FILE: &str = "pair.json";
pub const STRUCTURAL_FILE: &str = "structural.json";
pub const LOSSLESS_FILE: &str = "lossless.json";
pub const FOSTER_FILE: &str = "foster.json";

pub struct StageCtx<'a> {
    out_dir: &'a Path,
    grid: Vec<f64>,
    grid_points: usize,
}

impl<'a> StageCtx<'a> {
    fn new(args: &'a StageArgs) -> CliResult<Self> {
        if args.grid_points < 2 {
            return Err(Failure::Domain(
                "grid-points must be at least 2".into(),
            ));
        }
        fsio::ensure_dir(&args.out_dir)?;
        Ok(StageCtx {
            out_dir: &args.out_dir,
            grid: grid::validation_grid_with(args.grid_points),
            grid_points: args.grid_points,
        })
    }
}

fn stage_manifest(subcommand: &str, args: &StageArgs) -> Manifest {
    let mut m = Manifest::new(subcommand, &args.out_dir).with_input(&args.input);
    m.grid_points = Some(args.grid_points);
    m
}

#[derive(Serialize, Deserialize)]
pub struct FactorArtifact {
    pub density: ScalarSpectralDensity,
    pub analytic: RationalFunction,
    pub coanalytic: RationalFunction,
    pub verification: FactorVerification,
}

#[derive(Serialize, Deserialize)]
pub struct FactorVerification {
    pub density_checks: Report,
    pub grid_points: usize,
    pub grid_rel_err: f64,
    pub pass: bool,
}

pub fn factorize(density: ScalarSpectralDensity, ctx: &StageCtx) -> CliResult<FactorArtifact> {
    let density_checks = spectral::validate_density(&density);
    if !density_checks.all_pass() {
        let failed: Vec<&str> = density_checks
            .failures()
            .iter()
            .map(|d| d.name.as_str())
            .collect();
        return Err(Failure::Domain(format!(
            "not a valid rational spectral density; failed checks: {}",
            failed.join(", ")
        )));
    }
    let w = spectral::spectral_factor_scalar(&density)?;
    let wbar = spectral::coanalytic_factor(&w);
    let grid_rel_err = grid::max_rel_err(
        ctx.grid.iter().map(|&l| (w.gain_squared(l), density.at(l))),
        f64::MIN_POSITIVE,
    );
    let pass = grid_rel_err <= 1e-8;
    let artifact = FactorArtifact {
        density,
        analytic: w.tf,
        coanalytic: wbar.tf,
        verification: FactorVerification {
            density_checks,
            grid_points: ctx.grid_points,
            grid_rel_err,
            pass,
        },
    };
    fsio::write_json(&ctx.out_dir.join(FACTOR_FILE), &artifact)?;
    if !pass {
        return Err(Failure::Verification(format!(
            "{FACTOR_FILE}: |W(j\u{3bb})|\u{b2} misses the density by {grid_rel_err:.3e} on the grid"
        )));
    }
    Ok(artifact)
}

#[derive(Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model: StateSpaceModel,
    pub verification: ModelVerification,
}

#[derive(Serialize, Deserialize)]
pub struct ModelVerification {
    pub minimal: bool,
    pub hurwitz: bool,
    pub grid_points: usize,
    pub transfer_grid_err: f64,
    pub pass: bool,
}

pub fn realize(factor: &FactorArtifact, ctx: &StageCtx) -> CliResult<ModelArtifact> {
    let model = realization::minimal_realization(&factor.analytic)?;
    let minimal = model.is_minimal();
    let hurwitz = factor.analytic.den().is_hurwitz();

    // Uniform relative error: pointwise division would blow up wherever the
    // transfer function happens to pass near zero on the axis.
    let mut worst_abs = 0.0f64;
    let mut scale = 0.0f64;
    for &lambda in &ctx.grid {
        let s = Complex64::new(0.0, lambda);
        let want = factor.analytic.eval(s);
        scale = scale.max(want.norm());
        let have = match model.transfer_at(s) {
            Some(m) => m[(0, 0)],
            None => {
                return Err(Failure::Domain(format!(
                    "realized model has an axis pole at \u{3bb} = {lambda}"
                )))
            }
        };
        worst_abs = worst_abs.max((have - want).norm());
    }
    let transfer_grid_err = worst_abs / scale.max(f64::MIN_POSITIVE);
    let pass = minimal && hurwitz && transfer_grid_err <= 1e-8;
    let artifact = ModelArtifact {
        model,
        verification: ModelVerification {
            minimal,
            hurwitz,
            grid_points: ctx.grid_points,
            transfer_grid_err,
            pass,
        },
    };
    fsio::write_json(&ctx.out_dir.join(MODEL_FILE), &artifact)?;
    if !pass {
        return Err(Failure::Verification(format!(
            "{MODEL_FILE}: minimal={minimal} hurwitz={hurwitz} transfer grid error {transfer_grid_err:.3e}"
        )));
    }
    Ok(artifact)
}

#[derive(Serialize, Deserialize)]
pub struct PairArtifact {
    pub pair: ForwardBackwardPair,
    pub verification: PairVerification,
}

#[derive(Serialize, Deserialize)]
pub struct PairVerification {
    pub checks: Report,
    pub pass: bool,
}

pub fn backward(model_artifact: &ModelArtifact, ctx: &StageCtx) -> CliResult<PairArtifact> {
    let pair = realization::build_pair(&model_artifact.model)?;
    let checks = realization::validate_pair(&pair);
    let pass = checks.all_pass();
    let artifact = PairArtifact {
        pair,
        verification: PairVerification { checks, pass },
    };
    fsio::write_json(&ctx.out_dir.join(PAIR_FILE), &artifact)?;
    if !pass {
        let failed: Vec<&str> = artifact
            .verification
            .checks
            .failures()
            .iter()
            .map(|d| d.name.as_str())
            .collect();
        return Err(Failure::Verification(format!(
            "{PAIR_FILE}: failed checks: {}",
            failed.join(", ")
        )));
    }
    Ok(artifact)
}

#[derive(Serialize, Deserialize)]
pub struct StructuralArtifact {
    pub k: InnerFunction,
    pub verification: StructuralVerification,
}

#[derive(Serialize, Deserialize)]
pub struct StructuralVerification {
    pub checks: Report,
    pub pass: bool,
}

pub fn structural(pair_artifact: &PairArtifact, ctx: &StageCtx) -> CliResult<StructuralArtifact> {
    let k = realization::structural_function(&pair_artifact.pair)?;
    let checks = realization::validate_inner(&k);
    let pass = checks.all_pass();
    let artifact = StructuralArtifact {
        k,
        verification: StructuralVerification { checks, pass },
    };
    fsio::write_json(&ctx.out_dir.join(STRUCTURAL_FILE), &artifact)?;
    if !pass {
        let failed: Vec<&str> = artifact
            .verification
            .checks
            .failures()
            .iter()
            .map(|d| d.name.as_str())
            .collect();
        return Err(Failure::Verification(format!(
            "{STRUCTURAL_FILE}: failed checks: {}",
            failed.join(", ")
        )));
    }
    Ok(artifact)
}

#[derive(Serialize, Deserialize)]
pub struct LosslessArtifact {
    pub z0: LosslessImpedance,
    pub load: StateSpaceModel,
    pub verification: LosslessVerification,
}

#[derive(Serialize, Deserialize)]
pub struct LosslessVerification {
    pub axis_real_part: f64,
    pub cayley_round_trip: f64,
    pub grid_points: usize,
    pub pass: bool,
}

pub fn lossless_stage(
    structural_artifact: &StructuralArtifact,
    ctx: &StageCtx,
) -> CliResult<LosslessArtifact> {
    let k = &structural_artifact.k;
    let z0 = lossless::k_to_z0(k)?;
    let load = lossless::load_state_space(&z0)?;
    let k_back = lossless::z0_to_k(&z0)?;

    let mut axis_real_part = 0.0f64;
    let mut cayley_round_trip = 0.0f64;
    for &lambda in &ctx.grid {
        let s = Complex64::new(0.0, lambda);
        axis_real_part = axis_real_part.max(z0.at(s).re.abs());
        cayley_round_trip = cayley_round_trip.max((k_back.at(s) - k.at(s)).norm());
    }
    let pass = axis_real_part <= 1e-9 && cayley_round_trip <= 1e-9;
    let artifact = LosslessArtifact {
        z0,
        load,
        verification: LosslessVerification {
            axis_real_part,
            cayley_round_trip,
            grid_points: ctx.grid_points,
            pass,
        },
    };
    fsio::write_json(&ctx.out_dir.join(LOSSLESS_FILE), &artifact)?;
    if !pass {
        return Err(Failure::Verification(format!(
            "{LOSSLESS_FILE}: axis real part {axis_real_part:.3e}, Cayley round trip {cayley_round_trip:.3e}"
        )));
    }
    Ok(artifact)
}

#[derive(Serialize, Deserialize)]
pub struct FosterArtifact {
    pub foster: FosterForm,
    pub verification: FosterVerification,
}

#[derive(Serialize, Deserialize)]
pub struct FosterVerification {
    pub report: FosterReport,
    pub lossless: bool,
    pub reconstruct_rel_err: f64,
    pub pass: bool,
}

fn coeff_gap(a: &Polynomial, b: &Polynomial) -> f64 {
    a.sub(b).coeff_scale() / b.coeff_scale().max(f64::MIN_POSITIVE)
}

pub fn foster_stage(
    lossless_artifact: &LosslessArtifact,
    ctx: &StageCtx,
) -> CliResult<FosterArtifact> {
    let z0 = &lossless_artifact.z0;
    let foster = lossless::foster_synthesis(z0)?;
    let report = lossless::verify_foster(&z0.tf);
    let is_lossless = report.is_lossless();

    // Both sides carry monic denominators, so the expansion is checked
    // coefficient by coefficient instead of on the axis grid, where the
    // shared poles would dominate.
    let rebuilt = foster.reconstruct();
    let reconstruct_rel_err = coeff_gap(rebuilt.num(), z0.tf.num())
        .max(coeff_gap(rebuilt.den(), z0.tf.den()));
    let pass = is_lossless && reconstruct_rel_err <= 1e-9;
    let artifact = FosterArtifact {
        foster,
        verification: FosterVerification {
            report,
            lossless: is_lossless,
            reconstruct_rel_err,
            pass,
        },
    };
    fsio::write_json(&ctx.out_dir.join(FOSTER_FILE), &artifact)?;
    if !pass {
        return Err(Failure::Verification(format!(
            "{FOSTER_FILE}: lossless={is_lossless}, reconstruction error {reconstruct_rel_err:.3e}"
        )));
    }
    Ok(artifact)
}

pub fn cmd_factorize(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("factorize", args).write(ctx.out_dir)?;
    let density: ScalarSpectralDensity = fsio::read_json(&args.input)?;
    factorize(density, &ctx)?;
    Ok(())
}

pub fn cmd_realize(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("realize", args).write(ctx.out_dir)?;
    let factor: FactorArtifact = fsio::read_json(&args.input)?;
    realize(&factor, &ctx)?;
    Ok(())
}

pub fn cmd_backward(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("backward", args).write(ctx.out_dir)?;
    let model: ModelArtifact = fsio::read_json(&args.input)?;
    backward(&model, &ctx)?;
    Ok(())
}

pub fn cmd_structural(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("structural", args).write(ctx.out_dir)?;
    let pair: PairArtifact = fsio::read_json(&args.input)?;
    structural(&pair, &ctx)?;
    Ok(())
}

pub fn cmd_lossless(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("lossless", args).write(ctx.out_dir)?;
    let structural_artifact: StructuralArtifact = fsio::read_json(&args.input)?;
    lossless_stage(&structural_artifact, &ctx)?;
    Ok(())
}

pub fn cmd_foster(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("foster", args).write(ctx.out_dir)?;
    let lossless_artifact: LosslessArtifact = fsio::read_json(&args.input)?;
    foster_stage(&lossless_artifact, &ctx)?;
    Ok(())
}

pub fn cmd_pipeline(args: &StageArgs) -> CliResult<()> {
    let ctx = StageCtx::new(args)?;
    stage_manifest("pipeline", args).write(ctx.out_dir)?;
    let density: ScalarSpectralDensity = fsio::read_json(&args.input)?;
    let factor = factorize(density, &ctx)?;
    let model = realize(&factor, &ctx)?;
    let pair = backward(&model, &ctx)?;
    let structural_artifact = structural(&pair, &ctx)?;
    let lossless_artifact = lossless_stage(&structural_artifact, &ctx)?;
    foster_stage(&lossless_artifact, &ctx)?;
    Ok(())
}
