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

//! Deviation fields and the two contrasts.
//!
//! In the reparametrised coordinates the empirical deviation is linear,
//!
//! ```text
//! Delta_n(v) = v1 T1 + v2 T2hat + T3hat
//! T1    = G0 - F0 (x) F0
//! T2hat = (Fn - F0) (x) (Fn - F0)
//! T3hat = Gn - Fn (x) Fn
//! ```
//!
//! so the integral contrast is a quadratic form in `v` whose six
//! coefficients are computed once per instance ([`ContrastQuadratic`]).

use serde::{Deserialize, Serialize};

use crate::empirical::{Arity, CdfField, Grid};
use crate::error::{Error, Result};
use crate::model::{h_map, mix_weights, ThetaParam, VParam};

/// Gram determinants below this value are treated as a failure of linear
/// independence between `T1` and `T2hat`.
pub const SINGULAR_GRAM_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TFields {
    pub t1: Vec<f64>,
    pub t2hat: Vec<f64>,
    pub t3hat: Vec<f64>,
    pub grid: Grid,
}

fn check_arity(field: &CdfField, arity: Arity) -> Result<()> {
    if field.arity == arity {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "expected a {arity:?}-dimensional field"
        )))
    }
}

fn check_inputs(fhat: &CdfField, ghat: &CdfField, f0: &CdfField, g0: &CdfField) -> Result<()> {
    check_arity(fhat, Arity::One)?;
    check_arity(f0, Arity::One)?;
    check_arity(ghat, Arity::Two)?;
    check_arity(g0, Arity::Two)?;
    if !(fhat.same_grid(ghat) && fhat.same_grid(f0) && fhat.same_grid(g0)) {
        return Err(Error::GridMismatch);
    }
    if fhat.grid.nodes_x != fhat.grid.nodes_y {
        return Err(Error::InvalidParameter(
            "contrast fields need identical x and y nodes".into(),
        ));
    }
    Ok(())
}

impl TFields {
    pub fn new(fhat: &CdfField, ghat: &CdfField, f0: &CdfField, g0: &CdfField) -> Result<Self> {
        check_inputs(fhat, ghat, f0, g0)?;
        let g = fhat.grid.size_x();
        let mut t1 = Vec::with_capacity(g * g);
        let mut t2hat = Vec::with_capacity(g * g);
        let mut t3hat = Vec::with_capacity(g * g);
        for i in 0..g {
            let fi = fhat.values[i];
            let f0i = f0.values[i];
            for j in 0..g {
                let k = i * g + j;
                let fj = fhat.values[j];
                let f0j = f0.values[j];
                t1.push(g0.values[k] - f0i * f0j);
                t2hat.push((fi - f0i) * (fj - f0j));
                t3hat.push(ghat.values[k] - fi * fj);
            }
        }
        Ok(Self {
            t1,
            t2hat,
            t3hat,
            grid: fhat.grid.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t1.is_empty()
    }

    /// Zeroes `T1`, giving an independent gold standard.
    pub fn with_zero_t1(mut self) -> Self {
        self.t1.iter_mut().for_each(|t| *t = 0.0);
        self
    }
}

pub fn t_fields(fhat: &CdfField, ghat: &CdfField, f0: &CdfField, g0: &CdfField) -> Result<TFields> {
    TFields::new(fhat, ghat, f0, g0)
}

pub fn delta_n(v: &VParam, fields: &TFields) -> Vec<f64> {
    fields
        .t1
        .iter()
        .zip(&fields.t2hat)
        .zip(&fields.t3hat)
        .map(|((t1, t2), t3)| v.v1 * t1 + v.v2 * t2 + t3)
        .collect()
}

/// Integral contrast by direct summation over the grid (uniform weight).
pub fn d_n_direct(v: &VParam, fields: &TFields) -> f64 {
    let sum: f64 = fields
        .t1
        .iter()
        .zip(&fields.t2hat)
        .zip(&fields.t3hat)
        .map(|((t1, t2), t3)| {
            let d = v.v1 * t1 + v.v2 * t2 + t3;
            d * d
        })
        .sum();
    sum / fields.len() as f64
}

/// Integral contrast, evaluated through the quadratic form.
pub fn d_n(v: &VParam, fields: &TFields) -> f64 {
    quadratic_form(fields).eval(v)
}

/// Sup contrast over the grid nodes.
pub fn s_n(v: &VParam, fields: &TFields) -> f64 {
    fields
        .t1
        .iter()
        .zip(&fields.t2hat)
        .zip(&fields.t3hat)
        .map(|((t1, t2), t3)| (v.v1 * t1 + v.v2 * t2 + t3).abs())
        .fold(0.0, f64::max)
}

/// `d_n(v) = a11 v1^2 + 2 a12 v1 v2 + a22 v2^2 + 2 b1 v1 + 2 b2 v2 + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastQuadratic {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c0: f64,
}

impl ContrastQuadratic {
    pub fn eval(&self, v: &VParam) -> f64 {
        let VParam { v1, v2 } = *v;
        let q = self.a11 * v1 * v1
            + 2.0 * self.a12 * v1 * v2
            + self.a22 * v2 * v2
            + 2.0 * self.b1 * v1
            + 2.0 * self.b2 * v2
            + self.c0;
        q.max(0.0)
    }

    pub fn gradient(&self, v: &VParam) -> [f64; 2] {
        [
            2.0 * (self.a11 * v.v1 + self.a12 * v.v2 + self.b1),
            2.0 * (self.a12 * v.v1 + self.a22 * v.v2 + self.b2),
        ]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        [
            [2.0 * self.a11, 2.0 * self.a12],
            [2.0 * self.a12, 2.0 * self.a22],
        ]
    }

    pub fn gram_det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Unconstrained minimiser, the solution of the gradient equation.
    pub fn stationary_point(&self) -> Result<VParam> {
        let det = self.gram_det();
        if det.is_nan() || det < SINGULAR_GRAM_THRESHOLD {
            return Err(Error::SingularGram { det });
        }
        let v1 = (-self.b1 * self.a22 + self.b2 * self.a12) / det;
        let v2 = (-self.b2 * self.a11 + self.b1 * self.a12) / det;
        Ok(VParam { v1, v2 })
    }

    /// Integral contrast as a function of the natural parameter.
    pub fn eval_theta(&self, theta: &ThetaParam) -> f64 {
        self.eval(&h_map(theta))
    }
}

pub fn quadratic_form(fields: &TFields) -> ContrastQuadratic {
    let mut acc = [0.0f64; 6];
    for ((t1, t2), t3) in fields.t1.iter().zip(&fields.t2hat).zip(&fields.t3hat) {
        acc[0] += t1 * t1;
        acc[1] += t1 * t2;
        acc[2] += t2 * t2;
        acc[3] += t1 * t3;
        acc[4] += t2 * t3;
        acc[5] += t3 * t3;
    }
    let n = fields.len() as f64;
    ContrastQuadratic {
        a11: acc[0] / n,
        a12: acc[1] / n,
        a22: acc[2] / n,
        b1: acc[3] / n,
        b2: acc[4] / n,
        c0: acc[5] / n,
    }
}

/// Deviation built directly from the mixture reconstruction
/// `lambda1 G0 + lambda2 F0 (x) F1 + lambda3 F1 (x) F0 + lambda4 F1 (x) F1`
/// with `F1 = (Fn - p F0) / r`. Serves as the reference path for [`delta_n`].
pub fn delta_definitional(
    theta: &ThetaParam,
    fhat: &CdfField,
    ghat: &CdfField,
    f0: &CdfField,
    g0: &CdfField,
) -> Result<Vec<f64>> {
    check_inputs(fhat, ghat, f0, g0)?;
    let w = mix_weights(theta);
    let [l1, l2, l3, l4] = w.lambda;
    let g = fhat.grid.size_x();
    let f1: Vec<f64> = fhat
        .values
        .iter()
        .zip(&f0.values)
        .map(|(f, f0)| (f - w.p * f0) / w.r)
        .collect();
    let mut out = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let k = i * g + j;
            let recon = l1 * g0.values[k]
                + l2 * f0.values[i] * f1[j]
                + l3 * f1[i] * f0.values[j]
                + l4 * f1[i] * f1[j];
            out.push(ghat.values[k] - recon);
        }
    }
    Ok(out)
}

/// Population distribution functions of the observed process,
/// `F = p F0 + r F1` and the four-pattern mixture for `G`.
pub fn mixture_cdfs(
    theta: &ThetaParam,
    f0: &CdfField,
    g0: &CdfField,
    f1: &CdfField,
) -> Result<(CdfField, CdfField)> {
    check_arity(f0, Arity::One)?;
    check_arity(f1, Arity::One)?;
    check_arity(g0, Arity::Two)?;
    if !(f0.same_grid(g0) && f0.same_grid(f1)) {
        return Err(Error::GridMismatch);
    }
    let w = mix_weights(theta);
    let [l1, l2, l3, l4] = w.lambda;
    let grid = f0.grid.clone();
    let g = grid.size_x();
    let f: Vec<f64> = f0
        .values
        .iter()
        .zip(&f1.values)
        .map(|(a, b)| (w.p * a + w.r * b).clamp(0.0, 1.0))
        .collect();
    let mut gv = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let val = l1 * g0.values[i * g + j]
                + l2 * f0.values[i] * f1.values[j]
                + l3 * f1.values[i] * f0.values[j]
                + l4 * f1.values[i] * f1.values[j];
            gv.push(val.clamp(0.0, 1.0));
        }
    }
    Ok((
        CdfField::new(f, grid.clone(), Arity::One)?,
        CdfField::new(gv, grid, Arity::Two)?,
    ))
}
