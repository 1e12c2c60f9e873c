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

//! Derivative-free minimisation on a two-dimensional box.

/// Nelder-Mead settings. Trial points leaving the box are mirrored back
/// across the violated face.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub initial_step: f64,
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: [f64; 2],
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn reflect_into(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    let mut y = x;
    // a few mirror passes are enough for steps comparable to the box width
    for _ in 0..4 {
        if y < lo {
            y = lo + (lo - y);
        } else if y > hi {
            y = hi - (y - hi);
        } else {
            return y;
        }
    }
    y.clamp(lo, hi)
}

impl NelderMead {
    pub fn on_box(lower: [f64; 2], upper: [f64; 2]) -> Self {
        Self {
            lower,
            upper,
            initial_step: 0.05,
            max_iter: 200,
            f_tol: 1e-14,
            x_tol: 1e-10,
        }
    }

    pub fn project(&self, x: [f64; 2]) -> [f64; 2] {
        [
            reflect_into(x[0], self.lower[0], self.upper[0]),
            reflect_into(x[1], self.lower[1], self.upper[1]),
        ]
    }

    pub fn minimize<F>(&self, f: F, start: [f64; 2]) -> Minimum
    where
        F: Fn([f64; 2]) -> f64,
    {
        let mut evals = 0usize;
        let mut eval = |x: [f64; 2]| {
            evals += 1;
            f(x)
        };
        let x0 = self.project(start);
        let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
        simplex.push((x0, eval(x0)));
        for axis in 0..2 {
            let mut x = x0;
            let room_up = self.upper[axis] - x0[axis];
            let step = if room_up >= self.initial_step {
                self.initial_step
            } else {
                -self.initial_step
            };
            x[axis] += step;
            let x = self.project(x);
            simplex.push((x, eval(x)));
        }

        let order = |s: &mut Vec<([f64; 2], f64)>| {
            s.sort_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then(a.0[0].total_cmp(&b.0[0]))
                    .then(a.0[1].total_cmp(&b.0[1]))
            })
        };

        let mut iterations = 0;
        while iterations < self.max_iter {
            order(&mut simplex);
            let (best, worst) = (simplex[0].1, simplex[2].1);
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| (x[0] - simplex[0].0[0]).abs().max((x[1] - simplex[0].0[1]).abs()))
                .fold(0.0, f64::max);
            if (worst - best).abs() <= self.f_tol && size <= self.x_tol {
                break;
            }
            if size <= self.x_tol * 1e-3 {
                break;
            }
            iterations += 1;

            let centroid = [
                0.5 * (simplex[0].0[0] + simplex[1].0[0]),
                0.5 * (simplex[0].0[1] + simplex[1].0[1]),
            ];
            let along = |t: f64| {
                let w = simplex[2].0;
                [
                    centroid[0] + t * (centroid[0] - w[0]),
                    centroid[1] + t * (centroid[1] - w[1]),
                ]
            };

            let xr = self.project(along(1.0));
            let fr = eval(xr);
            if fr < simplex[0].1 {
                let xe = self.project(along(2.0));
                let fe = eval(xe);
                simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[1].1 {
                simplex[2] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[2].1 {
                let xc = self.project(along(0.5));
                (xc, eval(xc))
            } else {
                let xc = self.project(along(-0.5));
                (xc, eval(xc))
            };
            if fc < simplex[2].1.min(fr) {
                simplex[2] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0;
            for vertex in simplex.iter_mut().skip(1) {
                let x = [
                    x_best[0] + 0.5 * (vertex.0[0] - x_best[0]),
                    x_best[1] + 0.5 * (vertex.0[1] - x_best[1]),
                ];
                *vertex = (x, eval(x));
            }
        }
        order(&mut simplex);
        Minimum {
            x: simplex[0].0,
            value: simplex[0].1,
            iterations,
            evaluations: evals,
        }
    }
}

/// Golden-section search on `[lo, hi]` after a uniform pre-scan of `scan` points.
pub fn line_minimize<F>(f: F, lo: f64, hi: f64, scan: usize, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let scan = scan.max(3);
    let step = (hi - lo) / (scan - 1) as f64;
    let mut best = (lo, f(lo));
    let mut best_k = 0;
    for k in 1..scan {
        let x = if k == scan - 1 { hi } else { lo + k as f64 * step };
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
            best_k = k;
        }
    }
    let mut a = if best_k == 0 { lo } else { lo + (best_k - 1) as f64 * step };
    let mut b = if best_k + 1 >= scan { hi } else { lo + (best_k + 1) as f64 * step };
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    if fm < best.1 {
        (mid, fm)
    } else {
        best
    }
}
