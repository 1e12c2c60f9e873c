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

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("v = ({v1}, {v2}) has negative radicand {radicand}")]
    NegativeRadicand { v1: f64, v2: f64, radicand: f64 },

    #[error("v = ({v1}, {v2}) maps to a degenerate denominator beta - v2 = {denom}")]
    DegenerateDenominator { v1: f64, v2: f64, denom: f64 },

    #[error("theta = ({alpha}, {beta}) lies outside the box [{delta}, 1 - {delta}]^2")]
    OutsideBox { alpha: f64, beta: f64, delta: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("series of length {0} is too short for consecutive pairs")]
    SeriesTooShort(usize),

    #[error("fields are not defined on the same grid")]
    GridMismatch,

    #[error("variance must be positive and finite, got {0}")]
    InvalidVariance(f64),

    #[error("correlation must lie in (-1, 1), got {0}")]
    InvalidCorrelation(f64),

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("Gram determinant {det:e} below threshold: T1 and T2 are not linearly independent")]
    SingularGram { det: f64 },

    #[error("all four pair patterns have zero mass at ({z}, {zprime})")]
    AllZeroMass { z: f64, zprime: f64 },

    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
