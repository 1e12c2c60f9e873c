// Copyright 2026 The gsp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Monte Carlo experiments: repeated simulation and estimation with
//! per-repetition seeding, aggregate tables and plot-ready exports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::empirical::{gaussian_cdf, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::estimate::{minimize_d, minimize_s, plug_in_cdf, PreparedInstance};
use crate::model::{mix_weights, ThetaParam, DEFAULT_DELTA};
use crate::simulate::{derive_seed, simulate_observed, simulate_reference, Scenario};

pub const MIN_N: usize = 100;
pub const DEFAULT_REPETITIONS: usize = 100;
pub const DEFAULT_PANEL_CURVES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    D,
    S,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::D => "d",
            EstimatorKind::S => "s",
        }
    }
}

/// A preset name or an inline scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Name(String),
    Inline(Scenario),
}

impl ScenarioSpec {
    pub fn resolve(&self) -> Result<Scenario> {
        match self {
            ScenarioSpec::Name(name) => Scenario::preset(name),
            ScenarioSpec::Inline(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}
fn default_methods() -> Vec<EstimatorKind> {
    vec![EstimatorKind::D]
}
fn default_master_seed() -> u64 {
    1
}
fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_panel_curves() -> usize {
    DEFAULT_PANEL_CURVES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub n_values: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<EstimatorKind>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub clamp_f1: bool,
    /// Repetitions per `n` kept as curves in the panel exports.
    #[serde(default = "default_panel_curves")]
    pub panel_curves: usize,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec, n_values: Vec<usize>, repetitions: usize) -> Self {
        Self {
            scenario,
            n_values,
            repetitions,
            methods: default_methods(),
            outputs: None,
            workers: None,
            master_seed: default_master_seed(),
            grid_size: DEFAULT_GRID_SIZE,
            delta: DEFAULT_DELTA,
            clamp_f1: false,
            panel_curves: DEFAULT_PANEL_CURVES,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.n_values.is_empty() {
            return bad("n_values must not be empty".into());
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < MIN_N) {
            return bad(format!("trajectory length {n} is below {MIN_N}"));
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if self.grid_size < 2 {
            return bad(format!("grid_size {} is too small", self.grid_size));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad(format!("delta {} outside (0, 1/2)", self.delta));
        }
        self.scenario.resolve()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex-encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn sorted_methods(&self) -> Vec<EstimatorKind> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

/// One plug-in curve and the empirical distribution function of the series on the same nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub n: usize,
    pub repetition: usize,
    pub nodes: Vec<f64>,
    pub f1_hat: Vec<f64>,
    pub fn_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionOutcome {
    pub n: usize,
    pub repetition: usize,
    pub seed: u64,
    pub estimates: Vec<(EstimatorKind, [f64; 2])>,
    pub f1_sup_error: Option<f64>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub curve: Option<CurveSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: EstimatorKind,
    pub n: usize,
    pub count: usize,
    pub failures: usize,
    pub mean: [f64; 2],
    pub bias: [f64; 2],
    pub std: [f64; 2],
    /// Sample covariance of `sqrt(n) (estimate - mean)`.
    pub covariance: [[f64; 2]; 2],
    pub boundary_hits: usize,
    /// `(repetition, seed, alpha, beta)` in repetition order.
    pub samples: Vec<(usize, u64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1ErrorSummary {
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub n: usize,
    pub repetition: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: Scenario,
    pub config_hash: String,
    pub master_seed: u64,
    pub repetitions: usize,
    pub summaries: Vec<MethodSummary>,
    pub f1_errors: Vec<F1ErrorSummary>,
    pub failures: Vec<FailureRecord>,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub panels: Vec<CurveSample>,
    pub elapsed_secs: f64,
}

impl McReport {
    pub fn summary(&self, method: EstimatorKind, n: usize) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method && s.n == n)
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn run_repetition(
    config: &ExperimentConfig,
    scenario: &Scenario,
    methods: &[EstimatorKind],
    n: usize,
    repetition: usize,
) -> RepetitionOutcome {
    let seed = derive_seed(config.master_seed, repetition as u64);
    let mut outcome = RepetitionOutcome {
        n,
        repetition,
        seed,
        estimates: Vec::new(),
        f1_sup_error: None,
        failure: None,
        curve: None,
    };
    if let Err(e) = fill_repetition(config, scenario, methods, &mut outcome) {
        outcome.failure = Some(e.to_string());
    }
    outcome
}

fn fill_repetition(
    config: &ExperimentConfig,
    scenario: &Scenario,
    methods: &[EstimatorKind],
    outcome: &mut RepetitionOutcome,
) -> Result<()> {
    let s = scenario.clone().with_n(outcome.n).with_seed(outcome.seed);
    let traj = simulate_observed(&s);
    let refs = simulate_reference(&s);
    let prepared = PreparedInstance::new(&traj.z, &refs, config.grid_size)?;
    let mut plug_in_theta: Option<ThetaParam> = None;
    for &m in methods {
        let theta = match m {
            EstimatorKind::D => minimize_d(&prepared.fields, config.delta)?.0,
            EstimatorKind::S => minimize_s(&prepared.fields, config.delta)?.0,
        };
        plug_in_theta.get_or_insert(theta);
        outcome.estimates.push((m, theta.as_array()));
    }
    let theta = plug_in_theta.expect("methods is nonempty");
    let f1 = plug_in_cdf(&theta, &prepared.fhat, &prepared.f0, config.clamp_f1)?;
    let var1 = s.v * s.v;
    let err = f1.sup_distance(|x| gaussian_cdf(s.m, var1, x).unwrap_or(f64::NAN));
    outcome.f1_sup_error = Some(err);
    if outcome.repetition < config.panel_curves {
        outcome.curve = Some(CurveSample {
            n: outcome.n,
            repetition: outcome.repetition,
            nodes: f1.nodes.clone(),
            f1_hat: f1.values,
            fn_hat: prepared.fhat.values.clone(),
        });
    }
    Ok(())
}

fn summarise(
    method: EstimatorKind,
    n: usize,
    truth: &ThetaParam,
    delta: f64,
    outcomes: &[&RepetitionOutcome],
) -> MethodSummary {
    let samples: Vec<(usize, u64, f64, f64)> = outcomes
        .iter()
        .filter_map(|o| {
            o.estimates
                .iter()
                .find(|(m, _)| *m == method)
                .map(|(_, x)| (o.repetition, o.seed, x[0], x[1]))
        })
        .collect();
    let count = samples.len();
    let failures = outcomes.len() - count;
    let k = count as f64;
    let coord = |c: usize| samples.iter().map(move |s| if c == 0 { s.2 } else { s.3 });
    let mean = if count == 0 {
        [f64::NAN; 2]
    } else {
        [stable_sum(coord(0)) / k, stable_sum(coord(1)) / k]
    };
    let cross = |a: usize, b: usize| -> f64 {
        if count < 2 {
            return 0.0;
        }
        let s = stable_sum(samples.iter().map(|s| {
            let x = [s.2 - mean[0], s.3 - mean[1]];
            x[a] * x[b]
        }));
        s / (k - 1.0)
    };
    let var = [cross(0, 0), cross(1, 1)];
    let c01 = cross(0, 1);
    let nf = n as f64;
    let tol = 1e-9;
    let boundary_hits = samples
        .iter()
        .filter(|s| {
            [s.2, s.3]
                .iter()
                .any(|&x| (x - delta).abs() <= tol || (x - (1.0 - delta)).abs() <= tol)
        })
        .count();
    MethodSummary {
        method,
        n,
        count,
        failures,
        mean,
        bias: [mean[0] - truth.alpha, mean[1] - truth.beta],
        std: [var[0].max(0.0).sqrt(), var[1].max(0.0).sqrt()],
        covariance: [[nf * var[0], nf * c01], [nf * c01, nf * var[1]]],
        boundary_hits,
        samples,
    }
}

pub fn run_montecarlo(config: &ExperimentConfig) -> Result<McReport> {
    config.validate()?;
    let start = Instant::now();
    let scenario = config.scenario.resolve()?;
    let methods = config.sorted_methods();
    let jobs: Vec<(usize, usize)> = config
        .n_values
        .iter()
        .flat_map(|&n| (0..config.repetitions).map(move |i| (n, i)))
        .collect();
    let run = |&(n, i): &(usize, usize)| run_repetition(config, &scenario, &methods, n, i);
    let outcomes: Vec<RepetitionOutcome> = match config.workers {
        Some(1) => jobs.iter().map(run).collect(),
        workers => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                builder = builder.num_threads(w);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| jobs.par_iter().map(run).collect())
        }
    };

    let mut summaries = Vec::new();
    let mut f1_errors = Vec::new();
    for &n in &config.n_values {
        let at_n: Vec<&RepetitionOutcome> = outcomes.iter().filter(|o| o.n == n).collect();
        for &m in &methods {
            summaries.push(summarise(m, n, &scenario.theta, config.delta, &at_n));
        }
        let errs: Vec<f64> = at_n.iter().filter_map(|o| o.f1_sup_error).collect();
        f1_errors.push(F1ErrorSummary {
            n,
            count: errs.len(),
            mean: if errs.is_empty() {
                f64::NAN
            } else {
                stable_sum(errs.iter().copied()) / errs.len() as f64
            },
            median: median(&errs),
            max: errs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let failures = outcomes
        .iter()
        .filter_map(|o| {
            o.failure.as_ref().map(|m| FailureRecord {
                n: o.n,
                repetition: o.repetition,
                seed: o.seed,
                message: m.clone(),
            })
        })
        .collect();
    let seeds = (0..config.repetitions)
        .map(|i| derive_seed(config.master_seed, i as u64))
        .collect();
    let panels = outcomes.iter().filter_map(|o| o.curve.clone()).collect();
    Ok(McReport {
        scenario,
        config_hash: config.hash(),
        master_seed: config.master_seed,
        repetitions: config.repetitions,
        summaries,
        f1_errors,
        failures,
        seeds,
        panels,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn file_stem(report: &McReport) -> String {
    report
        .scenario
        .name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes one bias/std table and one covariance table per method.
pub fn export_tables(report: &McReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = file_stem(report);
    let mut methods: Vec<EstimatorKind> = report.summaries.iter().map(|s| s.method).collect();
    methods.sort();
    methods.dedup();
    let mut written = Vec::new();
    for m in methods {
        let rows: Vec<&MethodSummary> = report.summaries.iter().filter(|s| s.method == m).collect();
        let table = csv_string(
            &[
                "n", "count", "failures", "bias_alpha", "std_alpha", "bias_beta", "std_beta",
                "boundary_hits",
            ],
            rows.iter().map(|s| {
                vec![
                    s.n.to_string(),
                    s.count.to_string(),
                    s.failures.to_string(),
                    s.bias[0].to_string(),
                    s.std[0].to_string(),
                    s.bias[1].to_string(),
                    s.std[1].to_string(),
                    s.boundary_hits.to_string(),
                ]
            }),
        )?;
        let path = dir.join(format!("table_{stem}_{}.csv", m.name()));
        write_file(&path, &table)?;
        written.push(path);
        let cov = csv_string(
            &["n", "count", "cov_aa", "cov_ab", "cov_bb"],
            rows.iter().map(|s| {
                vec![
                    s.n.to_string(),
                    s.count.to_string(),
                    s.covariance[0][0].to_string(),
                    s.covariance[0][1].to_string(),
                    s.covariance[1][1].to_string(),
                ]
            }),
        )?;
        let path = dir.join(format!("covariance_{stem}_{}.csv", m.name()));
        write_file(&path, &cov)?;
        written.push(path);
    }
    let f1 = csv_string(
        &["n", "count", "mean_sup_error", "median_sup_error", "max_sup_error"],
        report.f1_errors.iter().map(|e| {
            vec![
                e.n.to_string(),
                e.count.to_string(),
                e.mean.to_string(),
                e.median.to_string(),
                e.max.to_string(),
            ]
        }),
    )?;
    let path = dir.join(format!("f1_error_{stem}.csv"));
    write_file(&path, &f1)?;
    written.push(path);
    Ok(written)
}

/// Writes raw and `sqrt(n)`-centred estimates, one file per (method, n).
pub fn export_histogram_samples(report: &McReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = file_stem(report);
    let mut written = Vec::new();
    for s in &report.summaries {
        let rn = (s.n as f64).sqrt();
        let body = csv_string(
            &["repetition", "seed", "alpha_hat", "beta_hat", "centered_alpha", "centered_beta"],
            s.samples.iter().map(|&(rep, seed, a, b)| {
                vec![
                    rep.to_string(),
                    seed.to_string(),
                    a.to_string(),
                    b.to_string(),
                    (rn * (a - s.mean[0])).to_string(),
                    (rn * (b - s.mean[1])).to_string(),
                ]
            }),
        )?;
        let path = dir.join(format!("samples_{stem}_{}_n{}.csv", s.method.name(), s.n));
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes long-format curve panels of the plug-in estimate and of the
/// empirical distribution function, each with its true curve.
pub fn export_curves(report: &McReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = file_stem(report);
    let s = &report.scenario;
    let gold = s.gold_law();
    let w = mix_weights(&s.theta);
    let var1 = s.v * s.v;
    let f1_true = |x: f64| gaussian_cdf(s.m, var1, x);
    let f_true = |x: f64| -> Result<f64> {
        Ok(w.p * gaussian_cdf(gold.mu0, gold.var0, x)? + w.r * f1_true(x)?)
    };
    let mut ns: Vec<usize> = report.panels.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut written = Vec::new();
    let header = ["repetition", "node", "estimate", "truth"];
    for n in ns {
        let curves: Vec<&CurveSample> = report.panels.iter().filter(|c| c.n == n).collect();
        let mut f1_rows = Vec::new();
        let mut fn_rows = Vec::new();
        for c in &curves {
            for (k, &x) in c.nodes.iter().enumerate() {
                let rep = c.repetition.to_string();
                f1_rows.push(vec![rep.clone(), x.to_string(), c.f1_hat[k].to_string(), f1_true(x)?.to_string()]);
                fn_rows.push(vec![rep, x.to_string(), c.fn_hat[k].to_string(), f_true(x)?.to_string()]);
            }
        }
        let path = dir.join(format!("panel_f1_{stem}_n{n}.csv"));
        write_file(&path, &csv_string(&header, f1_rows)?)?;
        written.push(path);
        let path = dir.join(format!("panel_fn_{stem}_n{n}.csv"));
        write_file(&path, &csv_string(&header, fn_rows)?)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub repetition_seeds: Vec<u64>,
    pub failures: Vec<FailureRecord>,
    pub files: Vec<String>,
    pub elapsed_secs: f64,
}

/// Runs the experiment and writes tables, samples, curves and `manifest.json` into `dir`.
pub fn run_and_export(config: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<(McReport, PathBuf)> {
    let dir = dir.as_ref();
    let report = run_montecarlo(config)?;
    let mut files = export_tables(&report, dir)?;
    files.extend(export_histogram_samples(&report, dir)?);
    files.extend(export_curves(&report, dir)?);
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        config_hash: report.config_hash.clone(),
        master_seed: report.master_seed,
        repetition_seeds: report.seeds.clone(),
        failures: report.failures.clone(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        elapsed_secs: report.elapsed_secs,
    };
    let path = dir.join("manifest.json");
    write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok((report, path))
}
