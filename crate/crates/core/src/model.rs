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

//! Parameter algebra of the latent two-state chain.
//!
//! The chain has transition matrix `[[1 - alpha, alpha], [beta, 1 - beta]]`
//! with `(alpha, beta)` restricted to the box `[delta, 1 - delta]^2`. The
//! integral contrast becomes an exact quadratic after the change of variables
//! `v = h(theta)`:
//!
//! ```text
//! v1 = -beta (1 - alpha) / (alpha + beta)
//! v2 =  beta (alpha + beta - 1) / alpha
//! ```
//!
//! with inverse `g(v) = (beta (1 - beta) / (beta - v2), beta)` where
//! `beta = sqrt(v1 v2 + v2 - v1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default box margin.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Radicands in `(-RADICAND_SLACK, 0)` are treated as zero by [`g_map`].
const RADICAND_SLACK: f64 = 1e-12;

const DENOM_EPS: f64 = 1e-14;

pub type Mat2 = [[f64; 2]; 2];

/// Transition parameters of the latent chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParam {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

/// Rounding slack accepted at the faces of the box.
pub const BOX_TOL: f64 = 1e-12;

impl ThetaParam {
    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "box margin delta must lie in (0, 1/2), got {delta}"
            )));
        }
        let lo = delta;
        let hi = 1.0 - delta;
        let inside = |x: f64| x >= lo - BOX_TOL && x <= hi + BOX_TOL;
        if !(inside(alpha) && inside(beta)) {
            return Err(Error::OutsideBox { alpha, beta, delta });
        }
        // values within rounding of a face are snapped onto it
        Ok(Self {
            alpha: alpha.clamp(lo, hi),
            beta: beta.clamp(lo, hi),
            delta,
        })
    }

    /// Same as [`ThetaParam::new`] with the default margin.
    pub fn with_default_delta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, DEFAULT_DELTA)
    }

    /// Builds a parameter by projecting `(alpha, beta)` onto the box.
    pub fn clamped(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        let lo = delta;
        let hi = 1.0 - delta;
        Self::new(alpha.clamp(lo, hi), beta.clamp(lo, hi), delta)
    }

    pub fn lower(&self) -> f64 {
        self.delta
    }

    pub fn upper(&self) -> f64 {
        1.0 - self.delta
    }

    /// True when either coordinate sits on the box boundary within `tol`.
    pub fn on_boundary(&self, tol: f64) -> bool {
        let lo = self.lower();
        let hi = self.upper();
        (self.alpha - lo).abs() <= tol
            || (hi - self.alpha).abs() <= tol
            || (self.beta - lo).abs() <= tol
            || (hi - self.beta).abs() <= tol
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.alpha, self.beta]
    }
}

/// Stationary law and pair-pattern weights of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixWeights {
    /// Stationary mass of the gold-standard state.
    pub p: f64,
    /// Stationary mass of the poisoned state.
    pub r: f64,
    /// Weights of the pair patterns (0,0), (0,1), (1,0), (1,1).
    pub lambda: [f64; 4],
}

impl MixWeights {
    /// The pattern `(k, l)` maximising the stationary pair weight.
    pub fn modal_pattern(&self) -> (u8, u8) {
        let mut best = 0;
        for i in 1..4 {
            if self.lambda[i] > self.lambda[best] {
                best = i;
            }
        }
        ((best / 2) as u8, (best % 2) as u8)
    }
}

/// Reparametrised coordinates under which the integral contrast is quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VParam {
    pub v1: f64,
    pub v2: f64,
}

impl VParam {
    pub fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }
}

pub fn transition_matrix(theta: &ThetaParam) -> Mat2 {
    let ThetaParam { alpha, beta, .. } = *theta;
    [[1.0 - alpha, alpha], [beta, 1.0 - beta]]
}

pub fn mix_weights(theta: &ThetaParam) -> MixWeights {
    let ThetaParam { alpha, beta, .. } = *theta;
    let s = alpha + beta;
    let lambda2 = alpha * beta / s;
    let lambda1 = beta * (1.0 - alpha) / s;
    let lambda4 = alpha * (1.0 - beta) / s;
    MixWeights {
        p: beta / s,
        r: alpha / s,
        lambda: [lambda1, lambda2, lambda2, lambda4],
    }
}

pub fn h_map(theta: &ThetaParam) -> VParam {
    let ThetaParam { alpha, beta, .. } = *theta;
    VParam {
        v1: -beta * (1.0 - alpha) / (alpha + beta),
        v2: beta * (alpha + beta - 1.0) / alpha,
    }
}

/// Inverse of [`h_map`] without the box check: returns the raw `(alpha, beta)`.
pub fn g_map_raw(v: &VParam) -> Result<(f64, f64)> {
    let VParam { v1, v2 } = *v;
    let mut radicand = v1 * v2 + v2 - v1;
    if radicand < 0.0 {
        if radicand > -RADICAND_SLACK {
            radicand = 0.0;
        } else {
            return Err(Error::NegativeRadicand { v1, v2, radicand });
        }
    }
    let beta = radicand.sqrt();
    let denom = beta - v2;
    if denom.abs() < DENOM_EPS {
        return Err(Error::DegenerateDenominator { v1, v2, denom });
    }
    let alpha = beta * (1.0 - beta) / denom;
    if !alpha.is_finite() {
        return Err(Error::DegenerateDenominator { v1, v2, denom });
    }
    Ok((alpha, beta))
}

/// Inverse of [`h_map`]. Fails with [`Error::OutsideBox`] when `v` maps
/// outside `[delta, 1 - delta]^2`.
pub fn g_map(v: &VParam, delta: f64) -> Result<ThetaParam> {
    let (alpha, beta) = g_map_raw(v)?;
    ThetaParam::new(alpha, beta, delta)
}

/// Jacobian of `h` at `theta`, rows indexed by `(v1, v2)`, columns by `(alpha, beta)`.
pub fn dh_jacobian(theta: &ThetaParam) -> Mat2 {
    let ThetaParam { alpha: a, beta: b, .. } = *theta;
    let s2 = (a + b) * (a + b);
    [
        [(b * b + b) / s2, (a * a - a) / s2],
        [(b - b * b) / (a * a), (a + 2.0 * b - 1.0) / a],
    ]
}

/// Jacobian of `g` evaluated at `h(theta)`, written in the `theta` coordinates.
pub fn dg_jacobian(theta: &ThetaParam) -> Mat2 {
    let ThetaParam { alpha: a, beta: b, .. } = *theta;
    let s = a + b;
    [
        [
            s * (a + 2.0 * b - 1.0) / (2.0 * b * b),
            a * a * (1.0 - a) / (2.0 * b * b * s),
        ],
        [s * (b - 1.0) / (2.0 * a * b), a * (b + 1.0) / (2.0 * b * s)],
    ]
}

/// Coefficients of the deviation in the basis
/// `{G0 - F0 (x) F0, (F1 - F0) (x) (F1 - F0)}`.
pub fn c_coefficients(theta_star: &ThetaParam, theta: &ThetaParam) -> (f64, f64) {
    let rs = mix_weights(theta_star).r;
    let bs = 1.0 - theta_star.beta;
    let r = mix_weights(theta).r;
    let b = 1.0 - theta.beta;
    let c1 = -2.0 * rs + rs * bs + 2.0 * r - r * b;
    let c2 = (rs / r) * (bs * r - rs * b);
    (c1, c2)
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}
