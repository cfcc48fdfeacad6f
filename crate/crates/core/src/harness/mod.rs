//! Seeded instance generation, scenario configuration and suite runs.

mod generate;
mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use generate::{
    generate_path, generate_periodic_path, generate_structure, ginibre, random_hermitian, random_hermitian_with_kernel,
    random_projection, random_unitary,
};

use crate::error::{Error, Result};
use crate::heat::TGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Structure,
    S2,
    S5,
    S6,
    S7,
    S9,
    Ms,
    S8,
    Identities,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Structure,
        Suite::S2,
        Suite::S5,
        Suite::S6,
        Suite::S7,
        Suite::S9,
        Suite::Ms,
        Suite::S8,
        Suite::Identities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Structure => "structure",
            Suite::S2 => "s2",
            Suite::S5 => "s5",
            Suite::S6 => "s6",
            Suite::S7 => "s7",
            Suite::S9 => "s9",
            Suite::Ms => "ms",
            Suite::S8 => "s8",
            Suite::Identities => "identities",
        }
    }

    pub fn parse(name: &str) -> Result<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("suite: unknown suite '{name}', expected one of {}", names.join(", ")))
        })
    }

    /// Instance count when the config does not give one.
    pub fn default_instances(self) -> usize {
        match self {
            Suite::Structure => 200,
            Suite::S2 => 120,
            Suite::S5 => 10,
            Suite::S6 => 10,
            Suite::S7 => 50,
            Suite::S9 => 40,
            Suite::Ms => 20,
            Suite::S8 => 4,
            Suite::Identities => 500,
        }
    }

    /// Largest total coefficient dimension when the config does not give one.
    pub fn default_dim(self) -> usize {
        match self {
            Suite::Structure => 16,
            Suite::S2 => 12,
            Suite::S5 => 6,
            Suite::S6 => 4,
            Suite::S7 => 8,
            Suite::S9 => 6,
            Suite::Ms => 8,
            Suite::S8 => 4,
            Suite::Identities => 5,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ThetaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        (0..self.count)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64)
            .collect()
    }
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid { lo: -1.2, hi: 1.2, count: 33 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    pub x_max: f64,
    pub cells: usize,
}

impl Default for XGrid {
    fn default() -> Self {
        XGrid { x_max: 3.0, cells: 40 }
    }
}

/// Everything that determines a suite run. Two runs of the same config produce the same report hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub suite: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub kernel_dim: usize,
    #[serde(default)]
    pub instances: Option<usize>,
    /// Overrides of the named tolerances; see [`default_tolerances`].
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub t_grid: Option<TGrid>,
    #[serde(default)]
    pub theta_grid: Option<ThetaGrid>,
    #[serde(default)]
    pub x_grid: Option<XGrid>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Named tolerances and their defaults.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("structure", 1e-10),
        ("aps", 1e-10),
        ("propagator", 1e-10),
        ("integral", 1e-8),
        ("s5", 1e-3),
        ("mckean_singer", 1e-10),
        ("log", 1e-6),
        ("leading_rel", 1e-2),
        ("constant_rel", 2e-2),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl ScenarioConfig {
    pub fn new(suite: Suite, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            suite: suite.name().to_string(),
            dim: None,
            kernel_dim: 1,
            instances: None,
            tolerances: BTreeMap::new(),
            t_grid: None,
            theta_grid: None,
            x_grid: None,
            output: None,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn suite(&self) -> Result<Suite> {
        Suite::parse(&self.suite)
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(self.dim.unwrap_or(self.suite()?.default_dim()))
    }

    pub fn instances(&self) -> Result<usize> {
        Ok(self.instances.unwrap_or(self.suite()?.default_instances()))
    }

    /// Defaults merged with the overrides.
    pub fn tolerance_table(&self) -> BTreeMap<String, f64> {
        let mut t = default_tolerances();
        t.extend(self.tolerances.iter().map(|(k, v)| (k.clone(), *v)));
        t
    }

    pub(crate) fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().or_else(|| default_tolerances().get(name).copied()).expect("known tolerance")
    }

    pub fn validate(&self) -> Result<()> {
        let suite = self.suite()?;
        let dim = self.dim()?;
        if dim == 0 {
            return Err(Error::Config("dim: must be positive".into()));
        }
        if self.kernel_dim > dim {
            return Err(Error::Config(format!("kernel_dim: {} exceeds dim {dim}", self.kernel_dim)));
        }
        if self.instances == Some(0) {
            return Err(Error::Config("instances: must be positive".into()));
        }
        let known = default_tolerances();
        for (k, v) in &self.tolerances {
            if !known.contains_key(k) {
                return Err(Error::Config(format!("tolerances.{k}: unknown tolerance")));
            }
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerances.{k}: must be positive, got {v}")));
            }
        }
        if let Some(g) = &self.t_grid {
            g.validate().map_err(|e| Error::Config(format!("t_grid: {e}")))?;
        }
        if let Some(g) = &self.theta_grid {
            if g.count == 0 || !(g.lo <= g.hi) || !(g.lo.abs() < std::f64::consts::FRAC_PI_2 && g.hi.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(Error::Config(format!("theta_grid: need count >= 1 and -pi/2 < lo <= hi < pi/2, got {g:?}")));
            }
            if g.count > 1 && g.lo == g.hi {
                return Err(Error::Config("theta_grid: repeated points".into()));
            }
        }
        if let Some(g) = &self.x_grid {
            if g.cells < 2 || !(g.x_max > 0.0 && g.x_max.is_finite()) {
                return Err(Error::Config(format!("x_grid: need cells >= 2 and x_max > 0, got {g:?}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers: must be positive".into()));
        }
        if suite == Suite::S6 && dim < 2 {
            return Err(Error::Config("dim: the s6 suite needs dim >= 2".into()));
        }
        Ok(())
    }
}

/// A reported number. Non-finite reals are written as strings so that reports stay valid JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl Value {
    pub fn real(x: f64) -> Value {
        if x.is_finite() {
            Value::Real(x)
        } else {
            Value::Text(format!("{x}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn int(name: &str, value: i64, pass: bool) -> Self {
        Check { name: name.into(), value: Value::Int(value), tol: None, pass }
    }

    /// `|value| <= tol`.
    pub fn small(name: &str, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value: Value::real(value), tol: Some(tol), pass: value.abs() <= tol }
    }

    pub fn real(name: &str, value: f64, tol: Option<f64>, pass: bool) -> Self {
        Check { name: name.into(), value: Value::real(value), tol, pass }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Check { name: name.into(), value: Value::Bool(pass), tol: None, pass }
    }

    pub fn text(name: &str, value: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), value: Value::Text(value.into()), tol: None, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub id: u64,
    /// Seed of this instance's generators, drawn from the instance's stream.
    pub seed: u64,
    pub label: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InstanceResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
    pub commit: String,
    pub instances: Vec<InstanceResult>,
    /// Checks across instances, such as a common sign reading.
    pub summary: Vec<Check>,
    pub failing_instances: Vec<u64>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
    /// SHA-256 over everything above except the wall clock.
    pub hash: String,
}

/// Generator stream of instance `id`: the ChaCha20 stream `id` under the master seed.
pub fn instance_rng(master: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}

pub(crate) struct Instance {
    pub id: u64,
    pub seed: u64,
    pub rng: ChaCha20Rng,
}

fn hash_report(r: &RunReport) -> Result<String> {
    #[derive(Serialize)]
    struct Hashed<'a> {
        config: &'a ScenarioConfig,
        tolerances: &'a BTreeMap<String, f64>,
        version: &'a str,
        instances: &'a [InstanceResult],
        summary: &'a [Check],
    }
    // Worker count and output path change how a run executes, not what it computes.
    let config = ScenarioConfig { workers: None, output: None, ..r.config.clone() };
    let bytes = serde_json::to_vec(&Hashed {
        config: &config,
        tolerances: &r.tolerances,
        version: &r.version,
        instances: &r.instances,
        summary: &r.summary,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Runs every instance of the configured suite and writes the report when an output path is set.
pub fn run_suite(config: &ScenarioConfig) -> Result<RunReport> {
    config.validate()?;
    let suite = config.suite()?;
    let n = config.instances()?;
    let start = Instant::now();
    let run = || -> Vec<InstanceResult> {
        (0..n as u64)
            .into_par_iter()
            .map(|id| {
                let mut rng = instance_rng(config.seed, id);
                let seed = rng.next_u64();
                suites::run_instance(suite, config, Instance { id, seed, rng })
            })
            .collect()
    };
    let mut instances = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))?
            .install(run),
        None => run(),
    };
    instances.sort_by_key(|r| r.id);
    let summary = suites::summary(suite, config, &instances);
    let failing_instances: Vec<u64> = instances.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    let passed = failing_instances.is_empty() && summary.iter().all(|c| c.pass);
    let mut report = RunReport {
        config: config.clone(),
        tolerances: config.tolerance_table(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        commit: option_env!("DIRAC_BVP_COMMIT").unwrap_or("unknown").to_string(),
        instances,
        summary,
        failing_instances,
        passed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        hash: String::new(),
    };
    report.hash = hash_report(&report)?;
    if let Some(out) = &config.output {
        write_report(&report, out)?;
    }
    Ok(report)
}

/// Writes the JSON report to `path` and the per-check table next to it with a `.csv` extension.
pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    write_table(report, std::fs::File::create(path.with_extension("csv"))?)
}

/// One row per check: `instance, seed, label, check, value, tol, pass`.
pub fn write_table<W: std::io::Write>(report: &RunReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["instance", "seed", "label", "check", "value", "tol", "pass"])?;
    let fmt_value = |v: &Value| match v {
        Value::Int(i) => i.to_string(),
        Value::Real(x) => format!("{x:e}"),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) => s.clone(),
    };
    for r in &report.instances {
        if let Some(e) = &r.error {
            out.write_record([r.id.to_string(), r.seed.to_string(), r.label.clone(), "error".into(), e.clone(), String::new(), "false".into()])?;
        }
        for c in &r.checks {
            out.write_record([
                r.id.to_string(),
                r.seed.to_string(),
                r.label.clone(),
                c.name.clone(),
                fmt_value(&c.value),
                c.tol.map(|t| format!("{t:e}")).unwrap_or_default(),
                c.pass.to_string(),
            ])?;
        }
    }
    for c in &report.summary {
        out.write_record([
            "summary".into(),
            String::new(),
            String::new(),
            c.name.clone(),
            fmt_value(&c.value),
            c.tol.map(|t| format!("{t:e}")).unwrap_or_default(),
            c.pass.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
