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

//! Seeded generation of the poisoned observation process.
//!
//! Every scenario owns one 64-bit seed. Each random quantity is drawn from
//! its own ChaCha20 stream keyed by that seed, so the chain, the gold-standard
//! path, the poisoning draws and the reference samples never share state and
//! can be regenerated independently.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mix_weights, ThetaParam};

/// Named sub-streams derived from a scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Chain = 1,
    Gold = 2,
    Poison = 3,
    RefMarginal = 4,
    RefPairs = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finaliser applied to `(seed, index)`; used for per-repetition seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Full generative configuration of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub theta: ThetaParam,
    /// AR(1) regression coefficient.
    pub phi: f64,
    /// AR(1) innovation mean.
    pub m0: f64,
    /// AR(1) innovation standard deviation.
    pub v0: f64,
    /// Poisoning mean.
    pub m: f64,
    /// Poisoning standard deviation.
    pub v: f64,
    pub n: usize,
    pub ref_size: usize,
    pub seed: u64,
}

pub const PRESET_NAMES: [&str; 6] = ["S0strong", "S0weak", "S1", "S2", "S3", "S4"];

impl Scenario {
    /// Gaussian AR(1) gold standard with `m0 = v0 = 1` and a poisoning law
    /// `N(mean_factor * mu0, (0.8 sqrt(var0))^2)`.
    fn gaussian_preset(name: &str, alpha: f64, beta: f64, phi: f64, mean_factor: f64) -> Self {
        let mu0 = 1.0 / (1.0 - phi);
        let var0 = 1.0 / (1.0 - phi * phi);
        let n = 5000;
        Scenario {
            name: name.to_string(),
            theta: ThetaParam::with_default_delta(alpha, beta).expect("preset theta in box"),
            phi,
            m0: 1.0,
            v0: 1.0,
            m: mean_factor * mu0,
            v: 0.8 * var0.sqrt(),
            n,
            ref_size: 2 * n,
            seed: 1,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let s = match name.to_ascii_lowercase().as_str() {
            "s0strong" => Self::gaussian_preset("S0strong", 0.7, 0.8, 0.7, 2.5),
            "s0weak" => Self::gaussian_preset("S0weak", 0.3, 0.2, 0.7, 2.5),
            "s1" => Self::gaussian_preset("S1", 0.2, 0.4, 0.7, 1.5),
            "s2" => Self::gaussian_preset("S2", 0.2, 0.4, 0.7, 2.0),
            "s3" => Self::gaussian_preset("S3", 0.6, 0.3, 0.7, 1.5),
            "s4" => Self::gaussian_preset("S4", 0.6, 0.3, 0.5, 2.0),
            _ => return Err(Error::UnknownPreset(name.to_string())),
        };
        Ok(s)
    }

    pub fn presets() -> Vec<Self> {
        PRESET_NAMES
            .iter()
            .map(|n| Self::preset(n).expect("built-in preset"))
            .collect()
    }

    /// Resolves a preset name, falling back to a JSON file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::preset(name_or_path) {
            Ok(s) => Ok(s),
            Err(Error::UnknownPreset(_)) if Path::new(name_or_path).exists() => {
                Self::from_json_file(name_or_path)
            }
            Err(e) => Err(e),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<()> {
        ThetaParam::new(self.theta.alpha, self.theta.beta, self.theta.delta)?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return bad(format!("phi must lie in (0, 1), got {}", self.phi));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return bad(format!("v0 must be positive, got {}", self.v0));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("v must be positive, got {}", self.v));
        }
        if !(self.m0.is_finite() && self.m.is_finite()) {
            return bad("means must be finite".into());
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.ref_size < 2 {
            return bad(format!("ref_size must be at least 2, got {}", self.ref_size));
        }
        Ok(())
    }

    /// Sets the trajectory length and the matching reference size `N = 2n`.
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self.ref_size = 2 * n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Stationary mean of the gold standard.
    pub fn mu0(&self) -> f64 {
        self.m0 / (1.0 - self.phi)
    }

    /// Stationary variance of the gold standard.
    pub fn var0(&self) -> f64 {
        self.v0 * self.v0 / (1.0 - self.phi * self.phi)
    }

    pub fn gold_law(&self) -> GoldLaw {
        GoldLaw {
            mu0: self.mu0(),
            var0: self.var0(),
            phi: self.phi,
        }
    }
}

/// Stationary Gaussian law of the AR(1) gold standard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldLaw {
    pub mu0: f64,
    pub var0: f64,
    pub phi: f64,
}

/// One simulated path together with its hidden labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub z: Vec<f64>,
    pub x: Vec<u8>,
    pub scenario: Scenario,
}

/// Independent reference draws from the gold standard.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub marginal: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
}

/// Latent chain with `X1` drawn from the stationary law.
pub fn simulate_chain<R: Rng + ?Sized>(theta: &ThetaParam, n: usize, rng: &mut R) -> Vec<u8> {
    let r = mix_weights(theta).r;
    let mut x = Vec::with_capacity(n);
    if n == 0 {
        return x;
    }
    let mut state: u8 = u8::from(rng.random::<f64>() < r);
    x.push(state);
    for _ in 1..n {
        let u: f64 = rng.random();
        state = match state {
            0 => u8::from(u < theta.alpha),
            _ => u8::from(u >= theta.beta),
        };
        x.push(state);
    }
    x
}

/// Stationary Gaussian AR(1) path `Y_{k+1} = phi Y_k + eps_k`, `eps ~ N(m0, v0^2)`.
pub fn simulate_ar1<R: Rng + ?Sized>(phi: f64, m0: f64, v0: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mu0 = m0 / (1.0 - phi);
    let sd0 = v0 / (1.0 - phi * phi).sqrt();
    let mut y = Vec::with_capacity(n);
    if n == 0 {
        return y;
    }
    let mut cur = mu0 + sd0 * rng.sample::<f64, _>(StandardNormal);
    y.push(cur);
    for _ in 1..n {
        cur = phi * cur + m0 + v0 * rng.sample::<f64, _>(StandardNormal);
        y.push(cur);
    }
    y
}

pub fn simulate_iid_gaussian<R: Rng + ?Sized>(mean: f64, sd: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn simulate_observed(scenario: &Scenario) -> Trajectory {
    let n = scenario.n;
    let x = simulate_chain(
        &scenario.theta,
        n,
        &mut stream_rng(scenario.seed, Stream::Chain),
    );
    let gold = simulate_ar1(
        scenario.phi,
        scenario.m0,
        scenario.v0,
        n,
        &mut stream_rng(scenario.seed, Stream::Gold),
    );
    let poison = simulate_iid_gaussian(
        scenario.m,
        scenario.v,
        n,
        &mut stream_rng(scenario.seed, Stream::Poison),
    );
    let z = x
        .iter()
        .zip(gold.iter().zip(&poison))
        .map(|(&xi, (&g, &p))| if xi == 0 { g } else { p })
        .collect();
    Trajectory {
        z,
        x,
        scenario: scenario.clone(),
    }
}

/// Marginal sample and stationary pair sample of size `ref_size` each.
pub fn simulate_reference(scenario: &Scenario) -> ReferenceSample {
    let size = scenario.ref_size;
    let mu0 = scenario.mu0();
    let sd0 = scenario.var0().sqrt();
    let marginal = simulate_iid_gaussian(
        mu0,
        sd0,
        size,
        &mut stream_rng(scenario.seed, Stream::RefMarginal),
    );
    let mut rng = stream_rng(scenario.seed, Stream::RefPairs);
    let pairs = (0..size)
        .map(|_| {
            let first = mu0 + sd0 * rng.sample::<f64, _>(StandardNormal);
            let eps = scenario.m0 + scenario.v0 * rng.sample::<f64, _>(StandardNormal);
            (first, scenario.phi * first + eps)
        })
        .collect();
    ReferenceSample { marginal, pairs }
}

/// Writes `index,z,x`; the label column lets decoded output be scored.
pub fn write_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "z", "x"])?;
    for (k, (z, x)) in traj.z.iter().zip(&traj.x).enumerate() {
        w.write_record([k.to_string(), z.to_string(), x.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the `z` column of a series file, plus the `x` column when present.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Option<Vec<u8>>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let zcol = headers
        .iter()
        .position(|h| h == "z")
        .ok_or_else(|| Error::InvalidParameter(format!("{}: no `z` column", path.display())))?;
    let xcol = headers.iter().position(|h| h == "x");
    let mut z = Vec::new();
    let mut x = xcol.map(|_| Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse_err = |field: &str| Error::InvalidParameter(format!("{}: bad value `{field}`", path.display()));
        let zf = &rec[zcol];
        z.push(zf.trim().parse::<f64>().map_err(|_| parse_err(zf))?);
        if let (Some(c), Some(xs)) = (xcol, x.as_mut()) {
            let xf = &rec[c];
            xs.push(xf.trim().parse::<u8>().map_err(|_| parse_err(xf))?);
        }
    }
    Ok((z, x))
}
