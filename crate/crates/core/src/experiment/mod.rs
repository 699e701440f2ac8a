//! Seeded experiment drivers behind the `lstar` command line tool.
//!
//! An [`ExperimentConfig`] fully determines the output: trial `t` draws its
//! operator, signal and noise from `seed ^ t` on separate streams, trials
//! run in parallel and are merged in trial order, and every file carries the
//! config hash and library version instead of a timestamp.

mod runners;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use runners::{
    run_bounds_ledger, run_cmsv, run_montecarlo, run_montecarlo_summary, run_noise_calibration, run_recover,
    MonteCarloSummary, SweepPoint,
};

use crate::bounds::AlgorithmParams;
use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::operator::NoiseKind;
use crate::solvers::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Recover,
    Cmsv,
    Montecarlo,
    Bounds,
    NoiseCalibration,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Recover => "recover",
            ExperimentKind::Cmsv => "cmsv",
            ExperimentKind::Montecarlo => "montecarlo",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::NoiseCalibration => "noise-calibration",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub r: usize,
    /// Frobenius norm of the drawn signal.
    pub scale: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec { r: 1, scale: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    M,
    Tau,
    N2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSpec {
    /// Constant `C` in the threshold `C sqrt(n2) sigma`.
    pub c: f64,
    /// Target coverage of the selected `lambda`.
    pub quantile: f64,
    /// Probability that the selected order statistic covers the quantile.
    pub confidence: f64,
    /// Fresh trials used to validate the selection (0 means `trials`).
    pub holdout_trials: usize,
    /// `mu = lambda / kappa` is suggested for the matrix LASSO.
    pub kappa: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            c: 8.0,
            quantile: 0.95,
            confidence: 0.99,
            holdout_trials: 0,
            kappa: 0.5,
        }
    }
}

fn default_starts() -> usize {
    32
}

fn default_brute_samples() -> usize {
    100_000
}

fn default_true() -> bool {
    true
}

fn default_band() -> f64 {
    0.35
}

fn default_trials() -> usize {
    1
}

fn default_output_path() -> String {
    "out".into()
}

fn default_noise() -> NoiseKind {
    NoiseKind::None
}

/// Settings of the l*-CMSV estimator: tighter than the recovery defaults
/// because minima near zero are resolved in absolute terms.
pub fn default_estimator() -> SolverConfig {
    SolverConfig {
        max_iters: 20_000,
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        ..SolverConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// `ensemble.seed` is ignored: each trial draws from `seed ^ trial`.
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    #[serde(default)]
    pub algorithm: Option<AlgorithmParams>,
    /// l*-rank level for `cmsv` and `montecarlo`.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Rank for the rank-constrained estimates of `cmsv`.
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_brute_samples")]
    pub brute_samples: usize,
    /// Estimate `rho` and evaluate the bound in `recover`.
    #[serde(default = "default_true")]
    pub estimate_rho: bool,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Half-width of the band `[1 - band, 1 + band]` in `montecarlo`.
    #[serde(default = "default_band")]
    pub band: f64,
    /// Noise levels `epsilon` of the `bounds` ledger.
    #[serde(default)]
    pub noise_levels: Vec<f64>,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_path")]
    pub output_path: String,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_estimator")]
    pub estimator: SolverConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.ensemble.validate().map_err(wrap)?;
        self.solver.validate().map_err(wrap)?;
        self.estimator.validate().map_err(wrap)?;
        let (n1, n2) = (self.ensemble.n1, self.ensemble.n2);
        let p = n1.min(n2);
        if self.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        if self.starts == 0 {
            return Err(config_err("starts must be >= 1"));
        }
        if self.brute_samples < 10_000 {
            return Err(config_err("brute_samples must be >= 10000"));
        }
        if self.signal.r == 0 || self.signal.r > p || !(self.signal.scale > 0.0) {
            return Err(config_err(format!(
                "signal rank must lie in [1, {p}] and scale must be positive"
            )));
        }
        let tau_ok = |tau: f64, p: usize| tau >= 1.0 && tau <= p as f64;
        match self.kind {
            ExperimentKind::Recover => {
                if self.algorithm.is_none() {
                    return Err(config_err("recover needs an algorithm"));
                }
            }
            ExperimentKind::Cmsv => {
                let tau = self.tau.ok_or_else(|| config_err("cmsv needs tau"))?;
                if !tau_ok(tau, p) {
                    return Err(config_err(format!("tau = {tau} outside [1, {p}]")));
                }
                if let Some(r) = self.rank {
                    if r == 0 || r > p {
                        return Err(config_err(format!("rank {r} outside [1, {p}]")));
                    }
                }
            }
            ExperimentKind::Montecarlo => {
                let sweep = self.sweep.as_ref().ok_or_else(|| config_err("montecarlo needs a sweep"))?;
                if sweep.values.is_empty() {
                    return Err(config_err("sweep has no values"));
                }
                if !(self.band > 0.0 && self.band < 1.0) {
                    return Err(config_err("band must lie in (0, 1)"));
                }
                for &v in &sweep.values {
                    let (tau, p) = match sweep.axis {
                        SweepAxis::Tau => (v, p),
                        SweepAxis::M => {
                            if v < 1.0 || v.fract() != 0.0 {
                                return Err(config_err(format!("invalid m = {v}")));
                            }
                            (self.tau.ok_or_else(|| config_err("montecarlo needs tau"))?, p)
                        }
                        SweepAxis::N2 => {
                            if v < 1.0 || v.fract() != 0.0 {
                                return Err(config_err(format!("invalid n2 = {v}")));
                            }
                            let tau = self.tau.ok_or_else(|| config_err("montecarlo needs tau"))?;
                            (tau, n1.min(v as usize))
                        }
                    };
                    if !tau_ok(tau, p) {
                        return Err(config_err(format!("tau = {tau} outside [1, {p}]")));
                    }
                }
            }
            ExperimentKind::Bounds => {
                if n1 * n2 > crate::cmsv::BRUTE_FORCE_MAX_ENTRIES {
                    return Err(config_err("bounds ledger needs n1 * n2 <= 9"));
                }
                if self.noise_levels.is_empty() || self.noise_levels.iter().any(|e| !(*e >= 0.0)) {
                    return Err(config_err("bounds ledger needs nonnegative noise_levels"));
                }
            }
            ExperimentKind::NoiseCalibration => {
                if !matches!(self.noise, NoiseKind::Gaussian { sigma } if sigma >= 0.0) {
                    return Err(config_err("noise calibration needs gaussian noise with sigma >= 0"));
                }
                let c = &self.calibration;
                if !(c.quantile > 0.0 && c.quantile < 1.0 && c.confidence > 0.0 && c.confidence < 1.0) {
                    return Err(config_err("calibration quantile and confidence must lie in (0, 1)"));
                }
                if !(c.kappa > 0.0 && c.kappa < 1.0) || !(c.c >= 0.0) {
                    return Err(config_err("calibration needs kappa in (0, 1) and c >= 0"));
                }
            }
        }
        Ok(())
    }

    /// The config as embedded in outputs: everything except `output_path`,
    /// which does not influence results.
    pub fn provenance(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_path");
        }
        v
    }

    /// Hex SHA-256 of the canonical JSON form of [`Self::provenance`].
    pub fn hash(&self) -> String {
        let canonical = self.provenance().to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub files: Vec<OutputFile>,
    /// Trials whose solver or estimator stopped at `max_iters`.
    pub nonconverged: usize,
}

/// A table rendered as CSV and JSON with provenance columns.
pub(crate) struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Cell {
    Int(u64),
    Num(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => crate::bounds::fmt_f64(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => (*v).into(),
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Cell::Bool(v) => (*v).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

pub(crate) fn render(cfg: &ExperimentConfig, tables: Vec<Table>, format: OutputFormat, nonconverged: usize) -> Result<ExperimentOutput> {
    let hash = cfg.hash();
    let mut files = Vec::new();
    for t in tables {
        if format.csv() {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let mut header = t.columns.clone();
            header.push("config_hash".into());
            header.push("version".into());
            w.write_record(&header)?;
            for row in &t.rows {
                let mut rec: Vec<String> = row.iter().map(Cell::csv).collect();
                rec.push(hash.clone());
                rec.push(crate::VERSION.into());
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            files.push(OutputFile {
                name: format!("{}.csv", t.name),
                contents: String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?,
            });
        }
        if format.json() {
            let records: Vec<serde_json::Value> = t
                .rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> =
                        t.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            let doc = serde_json::json!({
                "config_hash": hash,
                "version": crate::VERSION,
                "config": cfg.provenance(),
                "records": records,
            });
            files.push(OutputFile {
                name: format!("{}.json", t.name),
                contents: serde_json::to_string_pretty(&doc)? + "\n",
            });
        }
    }
    Ok(ExperimentOutput { files, nonconverged })
}

/// Runs the experiment named by `cfg.kind`.
pub fn run(cfg: &ExperimentConfig, format: OutputFormat) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Recover => run_recover(cfg, format),
        ExperimentKind::Cmsv => run_cmsv(cfg, format),
        ExperimentKind::Montecarlo => run_montecarlo(cfg, format),
        ExperimentKind::Bounds => run_bounds_ledger(cfg, format),
        ExperimentKind::NoiseCalibration => run_noise_calibration(cfg, format),
    }
}

/// Writes every file of `out` into `dir`, creating it if needed.
pub fn write_output(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in &out.files {
        std::fs::write(dir.join(&f.name), f.contents.as_bytes())?;
    }
    Ok(())
}
