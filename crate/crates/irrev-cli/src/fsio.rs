//! File plumbing shared by the subcommands: JSON artifacts, CSV paths,
//! manifests, and content hashing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliResult, Failure};
use irrev::simulate::SamplePath;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| classify_json(path, e))
}

fn classify_json(path: &Path, e: serde_json::Error) -> Failure {
    let msg = format!("{}: {e}", path.display());
    match e.classify() {
        serde_json::error::Category::Data => Failure::Domain(msg),
        _ => Failure::Io(msg),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_string(path, &text)
}

pub fn write_string(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(2 * digest.len());
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// 17 significant digits, enough to reproduce any double exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// The fully resolved configuration of one run, written next to its outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub input: Option<String>,
    pub reference: Option<String>,
    pub out_dir: String,
    pub grid_points: Option<usize>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub segment_length: Option<usize>,
    pub quick: Option<bool>,
}

impl Manifest {
    pub fn new(subcommand: &str, out_dir: &Path) -> Self {
        Manifest {
            subcommand: subcommand.to_string(),
            input: None,
            reference: None,
            out_dir: out_dir.display().to_string(),
            grid_points: None,
            dt: None,
            steps: None,
            seed: None,
            beta: None,
            segment_length: None,
            quick: None,
        }
    }

    pub fn with_input(mut self, input: &Path) -> Self {
        self.input = Some(input.display().to_string());
        self
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        write_json(&out_dir.join("manifest.json"), self)
    }
}

/// `t,y_1..y_m[,x_1..x_n]` with every double at full precision.
pub fn path_to_csv(path: &SamplePath) -> String {
    let m = path.value_dim();
    let n = path
        .states
        .as_ref()
        .and_then(|s| s.first().map(|x| x.len()))
        .unwrap_or(0);
    let mut out = String::from("t");
    for i in 1..=m {
        let _ = write!(out, ",y_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for k in 0..path.len() {
        out.push_str(&fmt_f64(path.time(k)));
        for v in path.values[k].iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        if let Some(states) = &path.states {
            for v in states[k].iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// Reads a path CSV back into a sample path, keeping only the `y_*` columns.
pub fn path_from_csv(file: &Path) -> CliResult<SamplePath> {
    let text = fs::read_to_string(file)
        .map_err(|e| Failure::Io(format!("{}: {e}", file.display())))?;
    let name = file.display().to_string();
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Failure::Io(format!("{name}: empty file")))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(Failure::Io(format!("{name}: first column must be t")));
    }
    let m = cols.iter().filter(|c| c.starts_with("y_")).count();
    if m == 0 || !cols[1..=m.min(cols.len() - 1)].iter().all(|c| c.starts_with("y_")) {
        return Err(Failure::Io(format!(
            "{name}: expected y_1..y_m right after the t column"
        )));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<DVector<f64>> = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Failure::Io(format!(
                "{name}: row {} has {} fields, header has {}",
                row + 2,
                fields.len(),
                cols.len()
            )));
        }
        let mut parsed = Vec::with_capacity(1 + m);
        for f in &fields[..=m] {
            parsed.push(f.parse::<f64>().map_err(|e| {
                Failure::Io(format!("{name}: row {}: {e}", row + 2))
            })?);
        }
        times.push(parsed[0]);
        values.push(DVector::from_vec(parsed[1..].to_vec()));
    }
    if times.len() < 2 {
        return Err(Failure::Domain(format!(
            "{name}: a path needs at least two samples"
        )));
    }
    let dt = times[1] - times[0];
    let worst = times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t - k as f64 * dt).abs())
        .fold(0.0f64, f64::max);
    if dt.is_nan() || dt <= 0.0 || worst > 1e-9 * dt.abs().max(1.0) {
        return Err(Failure::Domain(format!(
            "{name}: time column is not uniformly spaced"
        )));
    }
    SamplePath::new(dt, values, None, 0, format!("imported from {name}"))
        .map_err(Failure::from)
}
