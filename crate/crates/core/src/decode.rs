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

//! Posterior decoding of the latent labels of consecutive observation pairs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::empirical::{gaussian_pdf1, gaussian_pdf2};
use crate::error::{Error, Result};
use crate::estimate::SampledCurve;
use crate::model::{mix_weights, ThetaParam};
use crate::simulate::GoldLaw;

/// Label patterns in probability order.
pub const PATTERNS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPosterior {
    /// Probabilities of (0,0), (0,1), (1,0), (1,1).
    pub probs: [f64; 4],
    pub map_label: (u8, u8),
}

impl PairPosterior {
    /// Normalises nonnegative pattern weights; ties go to the earlier pattern.
    pub fn from_weights(eta: [f64; 4], z: f64, zprime: f64) -> Result<Self> {
        let total: f64 = eta.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::AllZeroMass { z, zprime });
        }
        let probs = eta.map(|e| e / total);
        let mut best = 0;
        for k in 1..4 {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        Ok(Self {
            probs,
            map_label: PATTERNS[best],
        })
    }

    pub fn prob(&self, k: u8, l: u8) -> f64 {
        self.probs[(2 * k + l) as usize]
    }
}

pub fn pair_posterior(
    theta: &ThetaParam,
    f1: &SampledCurve,
    gold: &GoldLaw,
    z: f64,
    zprime: f64,
) -> Result<PairPosterior> {
    let [l1, l2, l3, l4] = mix_weights(theta).lambda;
    let f_z = f1.interpolate(z).max(0.0);
    let f_zp = f1.interpolate(zprime).max(0.0);
    let f0_z = gaussian_pdf1(gold.mu0, gold.var0, z)?;
    let f0_zp = gaussian_pdf1(gold.mu0, gold.var0, zprime)?;
    let g0 = gaussian_pdf2(gold.mu0, gold.var0, gold.phi, z, zprime)?;
    let eta = [l1 * g0, l2 * f0_z * f_zp, l3 * f_z * f0_zp, l4 * f_z * f_zp];
    PairPosterior::from_weights(eta, z, zprime)
}

/// One decoded pair; `posterior` is `None` when every pattern has zero mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedPair {
    pub index: usize,
    pub z: f64,
    pub zprime: f64,
    pub posterior: Option<PairPosterior>,
}

/// Decodes the non-overlapping pairs `(offset + 2i, offset + 2i + 1)`.
pub fn decode_pairs(
    theta: &ThetaParam,
    f1: &SampledCurve,
    gold: &GoldLaw,
    z: &[f64],
    offset: usize,
) -> Result<Vec<DecodedPair>> {
    if offset > 1 {
        return Err(Error::InvalidParameter(format!("pairing offset must be 0 or 1, got {offset}")));
    }
    let mut out = Vec::with_capacity(z.len() / 2);
    let mut k = offset;
    while k + 1 < z.len() {
        let posterior = match pair_posterior(theta, f1, gold, z[k], z[k + 1]) {
            Ok(p) => Some(p),
            Err(Error::AllZeroMass { .. }) => None,
            Err(e) => return Err(e),
        };
        out.push(DecodedPair {
            index: k,
            z: z[k],
            zprime: z[k + 1],
            posterior,
        });
        k += 2;
    }
    Ok(out)
}

/// Fraction of decoded pairs whose MAP label equals the hidden labels.
/// Undecidable pairs count as errors.
pub fn map_accuracy(decoded: &[DecodedPair], labels: &[u8]) -> f64 {
    if decoded.is_empty() {
        return 0.0;
    }
    let hits = decoded
        .iter()
        .filter(|d| {
            d.posterior
                .is_some_and(|p| p.map_label == (labels[d.index], labels[d.index + 1]))
        })
        .count();
    hits as f64 / decoded.len() as f64
}

pub fn write_decoded_csv<W: Write>(decoded: &[DecodedPair], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "z", "zprime", "p00", "p01", "p10", "p11", "map_k", "map_l"])?;
    for d in decoded {
        let mut rec = vec![d.index.to_string(), d.z.to_string(), d.zprime.to_string()];
        match d.posterior {
            Some(p) => {
                rec.extend(p.probs.iter().map(|x| x.to_string()));
                rec.push(p.map_label.0.to_string());
                rec.push(p.map_label.1.to_string());
            }
            None => rec.extend(std::iter::repeat_n("NA".to_string(), 6)),
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<decoded>", e))?;
    Ok(())
}

pub fn export_decoded_csv(decoded: &[DecodedPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_decoded_csv(decoded, std::io::BufWriter::new(file))
}
