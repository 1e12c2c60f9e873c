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

//! Minimum-contrast estimation of the transition parameters and plug-in
//! recovery of the poisoning law.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::contrast::{quadratic_form, s_n, ContrastQuadratic, TFields};
use crate::empirical::{
    ecdf1, ecdf2_pairs, ecdf2_rows, gaussian_pdf1, CdfField, Grid, DEFAULT_GRID_SIZE,
};
use crate::error::{Error, Result};
use crate::model::{g_map_raw, h_map, mix_weights, ThetaParam, VParam};
use crate::optim::{line_minimize, NelderMead};
use crate::simulate::{GoldLaw, ReferenceSample};

/// Points per axis of the coarse scan for the sup contrast.
pub const SUP_SCAN_POINTS: usize = 21;
/// Simplex iterations allowed per polish of the sup contrast.
pub const SUP_POLISH_ITERS: usize = 200;
const SUP_POLISH_STARTS: usize = 3;
const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    ClosedForm,
    FallbackSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DDiagnostics {
    pub path: SolverPath,
    /// Integral contrast at the returned estimate.
    pub contrast: f64,
    pub gram_det: f64,
    /// Unconstrained minimiser of the quadratic, possibly outside the image of the box.
    pub stationary_v: VParam,
    pub fallback_reason: Option<String>,
}

fn box_lattice(delta: f64, k: usize) -> Vec<f64> {
    let lo = delta;
    let hi = 1.0 - delta;
    let step = (hi - lo) / (k - 1) as f64;
    (0..k)
        .map(|i| if i == k - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Lexicographic (value, alpha, beta) order used for all tie-breaks.
fn better(a: (f64, [f64; 2]), b: (f64, [f64; 2])) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.1[0].total_cmp(&b.1[0]))
        .then(a.1[1].total_cmp(&b.1[1]))
        .is_lt()
}

fn closed_form(q: &ContrastQuadratic, v: &VParam, delta: f64) -> std::result::Result<ThetaParam, String> {
    let (alpha, beta) = g_map_raw(v).map_err(|e| e.to_string())?;
    let theta = ThetaParam::new(alpha, beta, delta).map_err(|e| e.to_string())?;
    let back = h_map(&theta);
    if (back.v1 - v.v1).abs() > ROUND_TRIP_TOL || (back.v2 - v.v2).abs() > ROUND_TRIP_TOL {
        return Err(format!("h(g(v)) = {back:?} does not reproduce {v:?}"));
    }
    let _ = q;
    Ok(theta)
}

/// Minimum of `q o h` over the box by multistart simplex search plus a line
/// search along each face.
fn fallback_search(q: &ContrastQuadratic, delta: f64) -> ([f64; 2], f64) {
    let lo = delta;
    let hi = 1.0 - delta;
    let objective = |x: [f64; 2]| q.eval(&h_map(&ThetaParam { alpha: x[0], beta: x[1], delta }));
    let nm = NelderMead {
        max_iter: 1000,
        f_tol: 1e-16,
        x_tol: 1e-11,
        ..NelderMead::on_box([lo, lo], [hi, hi])
    };
    let starts = [1.0 / 6.0, 0.5, 5.0 / 6.0].map(|t| lo + t * (hi - lo));
    let mut best: Option<(f64, [f64; 2])> = None;
    let mut offer = |cand: (f64, [f64; 2])| {
        if best.is_none_or(|b| better(cand, b)) {
            best = Some(cand);
        }
    };
    for &a in &starts {
        for &b in &starts {
            let m = nm.minimize(objective, [a, b]);
            offer((m.value, m.x));
        }
    }
    for fixed in [lo, hi] {
        let (a, fa) = line_minimize(|t| objective([t, fixed]), lo, hi, 181, 1e-12);
        offer((fa, [a, fixed]));
        let (b, fb) = line_minimize(|t| objective([fixed, t]), lo, hi, 181, 1e-12);
        offer((fb, [fixed, b]));
    }
    let (value, x) = best.expect("at least one candidate");
    // polish from the best candidate
    let m = nm.minimize(objective, x);
    if better((m.value, m.x), (value, x)) {
        (m.x, m.value)
    } else {
        (x, value)
    }
}

/// Integral-contrast estimator from a precomputed quadratic form.
pub fn minimize_d_quadratic(
    q: &ContrastQuadratic,
    delta: f64,
) -> Result<(ThetaParam, VParam, DDiagnostics)> {
    let gram_det = q.gram_det();
    let v = q.stationary_point()?;
    match closed_form(q, &v, delta) {
        Ok(theta) => Ok((
            theta,
            v,
            DDiagnostics {
                path: SolverPath::ClosedForm,
                contrast: q.eval(&v),
                gram_det,
                stationary_v: v,
                fallback_reason: None,
            },
        )),
        Err(reason) => {
            let (x, value) = fallback_search(q, delta);
            let theta = ThetaParam::clamped(x[0], x[1], delta)?;
            Ok((
                theta,
                h_map(&theta),
                DDiagnostics {
                    path: SolverPath::FallbackSearch,
                    contrast: value,
                    gram_det,
                    stationary_v: v,
                    fallback_reason: Some(reason),
                },
            ))
        }
    }
}

pub fn minimize_d(fields: &TFields, delta: f64) -> Result<(ThetaParam, VParam, DDiagnostics)> {
    minimize_d_quadratic(&quadratic_form(fields), delta)
}

/// Sup-contrast estimator: coarse scan plus simplex polish of the best scanned points.
pub fn minimize_s(fields: &TFields, delta: f64) -> Result<(ThetaParam, f64)> {
    let lo = delta;
    let hi = 1.0 - delta;
    let objective = |x: [f64; 2]| s_n(&h_map(&ThetaParam { alpha: x[0], beta: x[1], delta }), fields);
    let axis = box_lattice(delta, SUP_SCAN_POINTS);
    let mut scanned: Vec<(f64, [f64; 2])> = Vec::with_capacity(axis.len() * axis.len());
    for &a in &axis {
        for &b in &axis {
            scanned.push((objective([a, b]), [a, b]));
        }
    }
    scanned.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1[0].total_cmp(&y.1[0]))
            .then(x.1[1].total_cmp(&y.1[1]))
    });
    let step = (hi - lo) / (SUP_SCAN_POINTS - 1) as f64;
    let nm = NelderMead {
        initial_step: 0.5 * step,
        max_iter: SUP_POLISH_ITERS,
        f_tol: 1e-12,
        x_tol: 1e-8,
        ..NelderMead::on_box([lo, lo], [hi, hi])
    };
    let mut best = scanned[0];
    for &(_, start) in scanned.iter().take(SUP_POLISH_STARTS) {
        let m = nm.minimize(objective, start);
        if better((m.value, m.x), best) {
            best = (m.value, m.x);
        }
    }
    Ok((ThetaParam::clamped(best.1[0], best.1[1], delta)?, best.0))
}

/// A function sampled at ascending nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledCurve {
    /// Linear interpolation between nodes, zero outside `[first, last]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if n == 0 || !(x >= self.nodes[0] && x <= self.nodes[n - 1]) {
            return 0.0;
        }
        if n == 1 {
            return self.values[0];
        }
        let k = self.nodes.partition_point(|&t| t <= x).clamp(1, n - 1);
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Trapezoid rule over the node range.
    pub fn integral(&self) -> f64 {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Writes `node,value` rows.
    pub fn export_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["node", "value"])?;
        for (x, y) in self.nodes.iter().zip(&self.values) {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn sup_distance(&self, other: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, &y)| (y - other(x)).abs())
            .fold(0.0, f64::max)
    }
}

/// Plug-in inversion `(Fn - p F0) / r` on the grid nodes.
pub fn plug_in_cdf(theta: &ThetaParam, fhat: &CdfField, f0: &CdfField, clamp: bool) -> Result<SampledCurve> {
    if !fhat.same_grid(f0) {
        return Err(Error::GridMismatch);
    }
    let w = mix_weights(theta);
    let mut values: Vec<f64> = fhat
        .values
        .iter()
        .zip(&f0.values)
        .map(|(f, f0)| (f - w.p * f0) / w.r)
        .collect();
    if clamp {
        let mut running = 0.0f64;
        for v in values.iter_mut() {
            running = running.max(v.clamp(0.0, 1.0));
            *v = running;
        }
    }
    Ok(SampledCurve {
        nodes: fhat.grid.nodes_x.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(z: &[f64]) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::SeriesTooShort(z.len()));
    }
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

/// Gaussian-kernel density estimate of `z` at `nodes`.
pub fn kernel_density(z: &[f64], bandwidth: f64, nodes: &[f64]) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    if z.is_empty() {
        return Err(Error::EmptySample);
    }
    let norm = 1.0 / (z.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    // kernel contributions below exp(-0.5 * 40^2) are zero in f64
    let cutoff = 40.0 * bandwidth;
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(nodes
        .iter()
        .map(|&x| {
            let start = sorted.partition_point(|&s| s < x - cutoff);
            let end = sorted.partition_point(|&s| s <= x + cutoff);
            let sum: f64 = sorted[start..end]
                .iter()
                .map(|&s| {
                    let u = (x - s) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum();
            sum * norm
        })
        .collect())
}

/// Inverted kernel density `(f_n - p f0) / r` with `f0` the exact gold-standard density.
pub fn kernel_density_f1(
    theta: &ThetaParam,
    z: &[f64],
    bandwidth: Bandwidth,
    gold: &GoldLaw,
    nodes: &[f64],
) -> Result<(SampledCurve, f64)> {
    if z.len() < 2 {
        return Err(Error::SeriesTooShort(z.len()));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(z)?,
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(Error::InvalidBandwidth(h)),
    };
    let w = mix_weights(theta);
    let fz = kernel_density(z, h, nodes)?;
    let values = nodes
        .iter()
        .zip(fz)
        .map(|(&x, f)| Ok((f - w.p * gaussian_pdf1(gold.mu0, gold.var0, x)?) / w.r))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        SampledCurve {
            nodes: nodes.to_vec(),
            values,
        },
        h,
    ))
}

/// Empirical inputs of one estimation instance.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub grid: Grid,
    pub fhat: CdfField,
    pub ghat: CdfField,
    pub f0: CdfField,
    pub g0: CdfField,
    pub fields: TFields,
}

impl PreparedInstance {
    pub fn new(z: &[f64], reference: &ReferenceSample, grid_size: usize) -> Result<Self> {
        let grid = Grid::from_data(z, grid_size)?;
        Self::on_grid(z, reference, grid)
    }

    pub fn on_grid(z: &[f64], reference: &ReferenceSample, grid: Grid) -> Result<Self> {
        let fhat = ecdf1(z, &grid)?;
        let ghat = ecdf2_pairs(z, &grid)?;
        let f0 = ecdf1(&reference.marginal, &grid)?;
        let g0 = ecdf2_rows(&reference.pairs, &grid)?;
        let fields = TFields::new(&fhat, &ghat, &f0, &g0)?;
        Ok(Self {
            grid,
            fhat,
            ghat,
            f0,
            g0,
            fields,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    D,
    S,
    Both,
}

impl Method {
    pub fn wants_s(self) -> bool {
        matches!(self, Method::S | Method::Both)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(Method::D),
            "s" => Ok(Method::S),
            "both" => Ok(Method::Both),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub delta: f64,
    pub grid_size: usize,
    pub method: Method,
    pub clamp_f1: bool,
    pub bandwidth: Bandwidth,
    /// Number of nodes of the inverted density curve.
    pub density_nodes: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            delta: crate::model::DEFAULT_DELTA,
            grid_size: DEFAULT_GRID_SIZE,
            method: Method::D,
            clamp_f1: false,
            bandwidth: Bandwidth::Auto,
            density_nodes: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub theta_hat: ThetaParam,
    pub theta_tilde: Option<ThetaParam>,
    pub v_hat: VParam,
    pub contrast_at_min: f64,
    pub sup_contrast_at_min: Option<f64>,
    pub solver_path: SolverPath,
    pub diagnostics: DDiagnostics,
    /// Plug-in distribution function of the poisoning law on the contrast grid.
    pub f1_curve: SampledCurve,
    /// Inverted kernel density of the poisoning law.
    pub f1_density: SampledCurve,
    pub bandwidth: f64,
    pub gold_law: GoldLaw,
    pub elapsed_secs: f64,
}

pub fn estimate(
    z: &[f64],
    reference: &ReferenceSample,
    gold: &GoldLaw,
    options: &EstimateOptions,
) -> Result<EstimationReport> {
    let start = Instant::now();
    let prepared = PreparedInstance::new(z, reference, options.grid_size)?;
    let (theta_hat, v_hat, diagnostics) = minimize_d(&prepared.fields, options.delta)?;
    let (theta_tilde, sup_min) = if options.method.wants_s() {
        let (t, s) = minimize_s(&prepared.fields, options.delta)?;
        (Some(t), Some(s))
    } else {
        (None, None)
    };
    let f1_curve = plug_in_cdf(&theta_hat, &prepared.fhat, &prepared.f0, options.clamp_f1)?;
    let density_grid = Grid::midpoints(prepared.grid.range.0, prepared.grid.range.1, options.density_nodes)?;
    let (f1_density, bandwidth) =
        kernel_density_f1(&theta_hat, z, options.bandwidth, gold, &density_grid.nodes_x)?;
    Ok(EstimationReport {
        theta_hat,
        theta_tilde,
        v_hat,
        contrast_at_min: diagnostics.contrast,
        sup_contrast_at_min: sup_min,
        solver_path: diagnostics.path,
        diagnostics,
        f1_curve,
        f1_density,
        bandwidth,
        gold_law: *gold,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
