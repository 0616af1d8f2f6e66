//! File formats: measures and jets as JSON, plans as CSV, run manifests.
//!
//! Floats in JSON use the shortest representation that parses back to the
//! same bits. Plan CSV writes every float with 17 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::measures::{CenteredPair, DiscreteMeasure};
use crate::transport::{JetField, Plan3, PlanCell};

pub fn measure_to_json(m: &DiscreteMeasure) -> Result<String> {
    Ok(serde_json::to_string_pretty(m)?)
}

pub fn measure_from_json(s: &str) -> Result<DiscreteMeasure> {
    Ok(serde_json::from_str(s)?)
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    measure_from_json(&fs::read_to_string(path)?)
}

pub fn jets_to_json(j: &JetField) -> Result<String> {
    Ok(serde_json::to_string_pretty(j)?)
}

pub fn jets_from_json(s: &str) -> Result<JetField> {
    Ok(serde_json::from_str(s)?)
}

/// The four points of a two-point instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointInput {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["i".to_string(), "j".to_string()];
    for p in ["x", "y", "z"] {
        h.extend((0..dim).map(|k| format!("{p}_{k}")));
    }
    h.push("mass".into());
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `i,j,x_0..,y_0..,z_0..,mass`.
pub fn plan_to_csv(plan: &Plan3) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(plan.dim))?;
    for c in &plan.cells {
        let mut rec = vec![c.i.to_string(), c.j.to_string()];
        rec.extend(c.x.iter().chain(&c.y).chain(&c.z).map(|v| fmt(*v)));
        rec.push(fmt(c.mass));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn plan_from_csv(s: &str) -> Result<Plan3> {
    let mut r = csv::Reader::from_reader(s.as_bytes());
    let h = r.headers()?.clone();
    if h.len() < 6 || (h.len() - 3) % 3 != 0 {
        return Err(Error::Invalid(format!("plan CSV header has {} columns", h.len())));
    }
    let dim = (h.len() - 3) / 3;
    let expected = header(dim);
    if h.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Invalid(format!("plan CSV header must be {}", expected.join(","))));
    }
    let mut cells = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Invalid(format!("plan CSV row {}: bad {what}", line + 1));
        let i = rec[0].trim().parse().map_err(|_| bad("i"))?;
        let j = rec[1].trim().parse().map_err(|_| bad("j"))?;
        let nums: Vec<f64> = (2..rec.len())
            .map(|k| rec[k].trim().parse::<f64>().map_err(|_| bad(&expected[k])))
            .collect::<Result<_>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad("value"));
        }
        cells.push(PlanCell {
            i,
            j,
            x: nums[..dim].to_vec(),
            y: nums[dim..2 * dim].to_vec(),
            z: nums[2 * dim..3 * dim].to_vec(),
            mass: nums[3 * dim],
        });
    }
    Ok(Plan3 { dim, cells })
}

pub fn read_plan(path: &Path) -> Result<Plan3> {
    plan_from_csv(&fs::read_to_string(path)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Translation and masses applied by `validate_pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub translation: Vec<f64>,
    pub mu_mass: f64,
    pub nu_mass: f64,
}

impl From<&CenteredPair> for Normalization {
    fn from(p: &CenteredPair) -> Self {
        Self { translation: p.translation.clone(), mu_mass: p.mu_mass, nu_mass: p.nu_mass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputHash>,
    pub options: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Manifest {
    pub fn new(command: &str, opts: &SolverOptions) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: Vec::new(),
            options: serde_json::to_value(opts).unwrap_or_default(),
            normalization: None,
        }
    }

    pub fn hash_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputHash { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }
}

/// `plan.csv` gets `plan.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

pub fn write_with_manifest(path: &Path, contents: &str, manifest: &Manifest) -> Result<()> {
    fs::write(path, contents)?;
    fs::write(manifest_path(path), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}
