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

//! Grid evaluation of empirical and Gaussian distribution functions.
//!
//! All fields live on a [`Grid`]: one sorted node vector per axis. The 2-D
//! empirical distribution of consecutive pairs is computed by bucketing each
//! pair into its dominance cell and taking a two-dimensional prefix sum, so a
//! full `G x G` field costs `O(n log G + G^2)` instead of `O(n G^2)`.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of nodes per axis.
pub const DEFAULT_GRID_SIZE: usize = 64;

const FIELD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nodes_x: Vec<f64>,
    pub nodes_y: Vec<f64>,
    /// Support `[lo, hi]` the nodes were built from.
    pub range: (f64, f64),
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

impl Grid {
    pub fn new(nodes_x: Vec<f64>, nodes_y: Vec<f64>, range: (f64, f64)) -> Result<Self> {
        if nodes_x.is_empty() || nodes_y.is_empty() {
            return Err(Error::InvalidParameter("grid needs at least one node".into()));
        }
        if !strictly_increasing(&nodes_x) || !strictly_increasing(&nodes_y) {
            return Err(Error::InvalidParameter(
                "grid nodes must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            nodes_x,
            nodes_y,
            range,
        })
    }

    /// Same nodes on both axes.
    pub fn square(nodes: Vec<f64>) -> Result<Self> {
        let range = (
            *nodes.first().unwrap_or(&0.0),
            *nodes.last().unwrap_or(&0.0),
        );
        Self::new(nodes.clone(), nodes, range)
    }

    /// `size` equally spaced cell midpoints of `[lo, hi]` on both axes.
    pub fn midpoints(lo: f64, hi: f64, size: usize) -> Result<Self> {
        if size == 0 || hi <= lo || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cannot build a {size}-node grid on [{lo}, {hi}]"
            )));
        }
        let width = (hi - lo) / size as f64;
        let nodes: Vec<f64> = (0..size).map(|k| lo + (k as f64 + 0.5) * width).collect();
        Self::new(nodes.clone(), nodes, (lo, hi))
    }

    /// Midpoint grid on `[min z, max z]`.
    pub fn from_data(z: &[f64], size: usize) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::EmptySample);
        }
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::midpoints(lo, hi, size)
    }

    pub fn size_x(&self) -> usize {
        self.nodes_x.len()
    }

    pub fn size_y(&self) -> usize {
        self.nodes_y.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    One,
    Two,
}

/// A distribution function sampled on a grid. Two-dimensional values are
/// stored row-major, `values[i * size_y + j] = G(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfField {
    pub values: Vec<f64>,
    pub grid: Grid,
    pub arity: Arity,
}

impl CdfField {
    /// Validates bounds and monotonicity (and the rectangle inequality in 2-D).
    pub fn new(values: Vec<f64>, grid: Grid, arity: Arity) -> Result<Self> {
        let field = Self {
            values,
            grid,
            arity,
        };
        field.check()?;
        Ok(field)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let expected = match self.arity {
            Arity::One => self.grid.size_x(),
            Arity::Two => self.grid.size_x() * self.grid.size_y(),
        };
        if self.values.len() != expected {
            return bad("value count does not match the grid");
        }
        if self
            .values
            .iter()
            .any(|&v| !(-FIELD_TOL..=1.0 + FIELD_TOL).contains(&v))
        {
            return bad("distribution function values must lie in [0, 1]");
        }
        match self.arity {
            Arity::One => {
                if self.values.windows(2).any(|w| w[1] < w[0] - FIELD_TOL) {
                    return bad("distribution function must be non-decreasing");
                }
            }
            Arity::Two => {
                let ny = self.grid.size_y();
                for i in 0..self.grid.size_x() {
                    for j in 0..ny {
                        let v = self.values[i * ny + j];
                        let left = if i > 0 { self.values[(i - 1) * ny + j] } else { 0.0 };
                        let below = if j > 0 { self.values[i * ny + j - 1] } else { 0.0 };
                        let diag = if i > 0 && j > 0 {
                            self.values[(i - 1) * ny + j - 1]
                        } else {
                            0.0
                        };
                        if v < left - FIELD_TOL || v < below - FIELD_TOL {
                            return bad("distribution function must be non-decreasing");
                        }
                        if v - left - below + diag < -FIELD_TOL {
                            return bad("rectangle inequality violated");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &CdfField) -> bool {
        self.grid == other.grid
    }

    pub fn at(&self, i: usize) -> f64 {
        debug_assert_eq!(self.arity, Arity::One);
        self.values[i]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.arity, Arity::Two);
        self.values[i * self.grid.size_y() + j]
    }

    /// 1-D fields: one header row of nodes and one row of values.
    /// 2-D fields: header row of y nodes, then one row per x node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_field_csv(out, &self.grid, &self.values, self.arity)
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub(crate) fn write_field_csv<W: Write>(
    out: W,
    grid: &Grid,
    values: &[f64],
    arity: Arity,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match arity {
        Arity::One => {
            w.write_record(grid.nodes_x.iter().map(|x| x.to_string()))?;
            w.write_record(values.iter().map(|v| v.to_string()))?;
        }
        Arity::Two => {
            let ny = grid.size_y();
            let mut header = vec![String::new()];
            header.extend(grid.nodes_y.iter().map(|y| y.to_string()));
            w.write_record(&header)?;
            for (i, x) in grid.nodes_x.iter().enumerate() {
                let mut row = vec![x.to_string()];
                row.extend(values[i * ny..(i + 1) * ny].iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Counts `#{z <= node}` for every node of an ascending node vector.
fn merge_counts(sorted: &[f64], nodes: &[f64]) -> Vec<usize> {
    let mut counts = Vec::with_capacity(nodes.len());
    let mut idx = 0;
    for &node in nodes {
        while idx < sorted.len() && sorted[idx] <= node {
            idx += 1;
        }
        counts.push(idx);
    }
    counts
}

/// Empirical distribution function of `sample` on the x-nodes of `grid`.
pub fn ecdf1(sample: &[f64], grid: &Grid) -> Result<CdfField> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let sorted = sorted_copy(sample);
    let n = sample.len() as f64;
    let values = merge_counts(&sorted, &grid.nodes_x)
        .into_iter()
        .map(|c| c as f64 / n)
        .collect();
    Ok(CdfField {
        values,
        grid: grid.clone(),
        arity: Arity::One,
    })
}

/// First node index whose value is `>= v`; equals `nodes.len()` past the last node.
fn dominance_cell(nodes: &[f64], v: f64) -> usize {
    nodes.partition_point(|&node| node < v)
}

/// Dominance counts `#{(a, b): a <= x_i, b <= y_j}` over the whole grid.
fn pair_counts<I>(pairs: I, grid: &Grid) -> Vec<u64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let nx = grid.size_x();
    let ny = grid.size_y();
    let mut counts = vec![0u64; nx * ny];
    for (a, b) in pairs {
        let i = dominance_cell(&grid.nodes_x, a);
        let j = dominance_cell(&grid.nodes_y, b);
        if i < nx && j < ny {
            counts[i * ny + j] += 1;
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            counts[i * ny + j] += counts[i * ny + j - 1];
        }
    }
    for i in 1..nx {
        for j in 0..ny {
            counts[i * ny + j] += counts[(i - 1) * ny + j];
        }
    }
    counts
}

fn pair_field(counts: Vec<u64>, total: usize, grid: &Grid) -> CdfField {
    let total = total as f64;
    CdfField {
        values: counts.into_iter().map(|c| c as f64 / total).collect(),
        grid: grid.clone(),
        arity: Arity::Two,
    }
}

/// Empirical distribution of consecutive pairs `(z_i, z_{i+1})`, normalised by `n - 1`.
pub fn ecdf2_pairs(series: &[f64], grid: &Grid) -> Result<CdfField> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort(series.len()));
    }
    let counts = pair_counts(series.windows(2).map(|w| (w[0], w[1])), grid);
    Ok(pair_field(counts, series.len() - 1, grid))
}

/// Empirical distribution of i.i.d. rows `(a_i, b_i)`.
pub fn ecdf2_rows(rows: &[(f64, f64)], grid: &Grid) -> Result<CdfField> {
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let counts = pair_counts(rows.iter().copied(), grid);
    Ok(pair_field(counts, rows.len(), grid))
}

/// Monte Carlo gold-standard distribution functions from the reference samples.
pub fn reference_cdfs(
    marginal: &[f64],
    pairs: &[(f64, f64)],
    grid: &Grid,
) -> Result<(CdfField, CdfField)> {
    Ok((ecdf1(marginal, grid)?, ecdf2_rows(pairs, grid)?))
}

fn check_variance(var: f64) -> Result<()> {
    if var > 0.0 && var.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidVariance(var))
    }
}

pub fn gaussian_pdf1(mu: f64, var: f64, x: f64) -> Result<f64> {
    check_variance(var)?;
    let d = x - mu;
    Ok((-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt())
}

/// Bivariate normal density with common mean `mu`, common variance `var`
/// and correlation `rho`.
pub fn gaussian_pdf2(mu: f64, var: f64, rho: f64, x: f64, y: f64) -> Result<f64> {
    check_variance(var)?;
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidCorrelation(rho));
    }
    let a = (x - mu) / var.sqrt();
    let b = (y - mu) / var.sqrt();
    let one_m = 1.0 - rho * rho;
    let q = (a * a - 2.0 * rho * a * b + b * b) / one_m;
    Ok((-0.5 * q).exp() / (2.0 * PI * var * one_m.sqrt()))
}

pub fn gaussian_cdf(mu: f64, var: f64, x: f64) -> Result<f64> {
    check_variance(var)?;
    let t = (x - mu) / var.sqrt();
    Ok(0.5 * libm::erfc(-t / SQRT_2))
}

/// Exact `N(mu, var)` distribution function on the x-nodes of `grid`.
pub fn gaussian_cdf_field(mu: f64, var: f64, grid: &Grid) -> Result<CdfField> {
    let values = grid
        .nodes_x
        .iter()
        .map(|&x| gaussian_cdf(mu, var, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(CdfField {
        values,
        grid: grid.clone(),
        arity: Arity::One,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_pairs(series: &[f64], x: f64, y: f64) -> f64 {
        let hits = series
            .windows(2)
            .filter(|w| w[0] <= x && w[1] <= y)
            .count();
        hits as f64 / (series.len() - 1) as f64
    }

    #[test]
    fn grid_construction() {
        let g = Grid::midpoints(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes_x, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.nodes_x, g.nodes_y);
        assert!(Grid::midpoints(1.0, 1.0, 4).is_err());
        assert!(Grid::square(vec![0.0, 0.0]).is_err());
        let g = Grid::from_data(&[3.0, -1.0, 2.0], 2).unwrap();
        assert_eq!(g.range, (-1.0, 3.0));
        assert!(matches!(Grid::from_data(&[], 2), Err(Error::EmptySample)));
    }

    #[test]
    fn ecdf1_examples() {
        let g = Grid::square(vec![0.5, 2.0, 3.0, 10.0]).unwrap();
        let f = ecdf1(&[1.0, 2.0, 3.0], &g).unwrap();
        assert_eq!(f.values, vec![0.0, 2.0 / 3.0, 1.0, 1.0]);
        assert!(matches!(ecdf1(&[], &g), Err(Error::EmptySample)));
    }

    #[test]
    fn ecdf1_uniform_is_close_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let g = Grid::midpoints(0.0, 1.0, 200).unwrap();
        let f = ecdf1(&sample, &g).unwrap();
        let mut sup = 0.0f64;
        for (k, &x) in g.nodes_x.iter().enumerate() {
            let brute = sample.iter().filter(|&&s| s <= x).count() as f64 / sample.len() as f64;
            assert_eq!(f.values[k], brute);
            sup = sup.max((f.values[k] - x).abs());
        }
        assert!(sup < 0.01, "{sup}");
    }

    #[test]
    fn ecdf2_examples() {
        let g = Grid::square(vec![1.0, 2.0]).unwrap();
        let f = ecdf2_pairs(&[1.0, 2.0], &g).unwrap();
        assert_eq!(f.at2(0, 1), 1.0);
        assert_eq!(f.at2(0, 0), 0.0);
        assert!(matches!(ecdf2_pairs(&[1.0], &g), Err(Error::SeriesTooShort(1))));
        assert!(matches!(ecdf2_rows(&[], &g), Err(Error::EmptySample)));
    }

    #[test]
    fn ecdf2_matches_naive_at_random_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let series: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let mut nodes: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 4.4 - 2.2).collect();
        nodes.sort_by(f64::total_cmp);
        let g = Grid::square(nodes.clone()).unwrap();
        let f = ecdf2_pairs(&series, &g).unwrap();
        for (i, &x) in nodes.iter().enumerate() {
            for (j, &y) in nodes.iter().enumerate() {
                assert_eq!(f.at2(i, j), naive_pairs(&series, x, y));
            }
        }
    }

    #[test]
    fn ecdf2_marginal_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let series: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let mut nodes: Vec<f64> = (0..15).map(|k| k as f64 / 16.0 + 0.01).collect();
        nodes.push(1e9);
        let g = Grid::square(nodes).unwrap();
        let pairs = ecdf2_pairs(&series, &g).unwrap();
        let first = ecdf1(&series[..series.len() - 1], &g).unwrap();
        let last = g.size_y() - 1;
        for i in 0..g.size_x() {
            assert_eq!(pairs.at2(i, last), first.at(i));
        }
    }

    #[test]
    fn reference_cdf_median_and_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_001;
        let marg: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let rows: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let sorted = sorted_copy(&marg);
        let median = sorted[n / 2];
        let g = Grid::square(vec![median, 2.0]).unwrap();
        let (f0, g0) = reference_cdfs(&marg, &rows, &g).unwrap();
        assert!((f0.at(0) - 0.5).abs() <= 1.0 / n as f64);

        let first: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let g = Grid::square(vec![0.1, 0.4, 0.9, 5.0]).unwrap();
        let (fx, g0b) = reference_cdfs(&first, &rows, &g).unwrap();
        for i in 0..4 {
            assert_eq!(g0b.at2(i, 3), fx.at(i));
        }
        assert!(g0.check().is_ok());
    }

    #[test]
    fn field_validation() {
        let g = Grid::square(vec![0.0, 1.0]).unwrap();
        assert!(CdfField::new(vec![0.2, 0.1], g.clone(), Arity::One).is_err());
        assert!(CdfField::new(vec![0.2, 1.1], g.clone(), Arity::One).is_err());
        assert!(CdfField::new(vec![0.2], g.clone(), Arity::One).is_err());
        // monotone in both axes but the unit box has negative mass
        assert!(CdfField::new(vec![0.5, 0.5, 0.5, 0.4], g.clone(), Arity::Two).is_err());
        assert!(CdfField::new(vec![0.1, 0.5, 0.5, 1.0], g, Arity::Two).is_ok());
    }

    #[test]
    fn gaussian_densities() {
        assert!((gaussian_pdf1(0.0, 1.0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(matches!(gaussian_pdf1(0.0, 0.0, 0.0), Err(Error::InvalidVariance(_))));
        assert!(matches!(
            gaussian_pdf2(0.0, 1.0, 1.0, 0.0, 0.0),
            Err(Error::InvalidCorrelation(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let (x, y): (f64, f64) = (rng.random::<f64>() * 6.0 - 1.0, rng.random::<f64>() * 6.0 - 1.0);
            let joint = gaussian_pdf2(2.0, 1.7, 0.0, x, y).unwrap();
            let prod = gaussian_pdf1(2.0, 1.7, x).unwrap() * gaussian_pdf1(2.0, 1.7, y).unwrap();
            assert!((joint - prod).abs() < 1e-12);
        }
    }

    #[test]
    fn bivariate_density_integrates_to_one() {
        // composite trapezoid over mu +- 9 sd
        let (mu, var, rho) = (10.0 / 3.0, 1.0 / 0.51, 0.7);
        let sd = f64::sqrt(var);
        let k = 600;
        let lo = mu - 9.0 * sd;
        let h = 18.0 * sd / k as f64;
        let mut total = 0.0;
        for i in 0..=k {
            for j in 0..=k {
                let wi = if i == 0 || i == k { 0.5 } else { 1.0 };
                let wj = if j == 0 || j == k { 0.5 } else { 1.0 };
                let (x, y) = (lo + i as f64 * h, lo + j as f64 * h);
                total += wi * wj * gaussian_pdf2(mu, var, rho, x, y).unwrap();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-4, "{}", total * h * h);
    }

    #[test]
    fn gaussian_cdf_values() {
        assert!((gaussian_cdf(0.0, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-16);
        assert!((gaussian_cdf(0.0, 1.0, 1.96).unwrap() - 0.975_002_104_851_78).abs() < 1e-12);
        assert!((gaussian_cdf(1.0, 4.0, -1.0).unwrap() - 0.158_655_253_931_457).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = Grid::square(vec![0.0, 1.0]).unwrap();
        let f = CdfField::new(vec![0.25, 1.0], g.clone(), Arity::One).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1\n0.25,1\n");
        let f2 = CdfField::new(vec![0.1, 0.5, 0.5, 1.0], g, Arity::Two).unwrap();
        let mut buf = Vec::new();
        f2.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), ",0,1\n0,0.1,0.5\n1,0.5,1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn dominance_counts_match_naive(
            seed in any::<u64>(), n in 2usize..2000, g in 1usize..32,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // coarse values force ties with nodes
            let series: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).floor() / 4.0).collect();
            let mut nodes: Vec<f64> = (0..g).map(|k| k as f64 * 5.5 / g as f64 - 0.25).collect();
            nodes.dedup();
            let grid = Grid::square(nodes.clone()).unwrap();
            let field = ecdf2_pairs(&series, &grid).unwrap();
            for (i, &x) in nodes.iter().enumerate() {
                for (j, &y) in nodes.iter().enumerate() {
                    prop_assert_eq!(field.at2(i, j), naive_pairs(&series, x, y));
                }
            }
            prop_assert!(field.check().is_ok());
        }
    }
}
