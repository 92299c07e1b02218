//! The estimator family `f̂_h`, its variance proxies and thresholds.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::bandwidth_grid::BandwidthGrid;
use crate::error::{Error, Result};
use crate::kernel_lab::{build_deconv_kernel_auto, DeconvKernelTable, KernelConstants, KernelSpec, SynthesisPlan};
use crate::model::{NoiseModel, Sample};
use crate::util::fmt17;

/// `f̂_h(x) = n⁻¹ Σ M(Z_i − x, h)`, summed over every observation.
pub fn estimate_at(sample: &Sample, table: &DeconvKernelTable, x: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    let sum: f64 = sample
        .rows()
        .map(|z| {
            for ((yj, zj), xj) in y.iter_mut().zip(z).zip(x) {
                *yj = zj - xj;
            }
            table.eval(&y)
        })
        .sum();
    sum / sample.n() as f64
}

/// `σ̂²(x,h) = n⁻¹ Σ M²(Z_i − x, h)`.
pub fn empirical_sigma2(sample: &Sample, table: &DeconvKernelTable, x: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    let sum: f64 = sample
        .rows()
        .map(|z| {
            for ((yj, zj), xj) in y.iter_mut().zip(z).zip(x) {
                *yj = zj - xj;
            }
            table.eval(&y).powi(2)
        })
        .sum();
    sum / sample.n() as f64
}

/// `λ_n(h) = 4 ln M_∞ + 6 ln n + (8p + 26) Σ (1 + γ_j)|ln h_j|`.
pub fn lambda_n(h: &[f64], n: usize, p: f64, consts: &KernelConstants) -> f64 {
    let logs: f64 = h.iter().zip(&consts.gamma).map(|(&hj, &g)| (1.0 + g) * hj.ln().abs()).sum();
    4.0 * consts.m_inf.ln() + 6.0 * (n as f64).ln() + (8.0 * p + 26.0) * logs
}

/// `Û_n = sqrt(2λσ̂²/n) + 4M_∞λ / (3n ∏h_j(h_j∧1)^{γ_j})` for a given `λ = λ_n(h)`.
pub fn u_hat(lambda: f64, sigma2: f64, h: &[f64], n: usize, consts: &KernelConstants) -> f64 {
    let n = n as f64;
    (2.0 * lambda * sigma2 / n).sqrt() + 4.0 * consts.m_inf * lambda / (3.0 * n * consts.scale_factor(h))
}

/// One table per grid member, built in parallel.
pub fn build_tables(kernel: &KernelSpec, model: &NoiseModel, grid: &BandwidthGrid, plan: &SynthesisPlan) -> Result<Vec<DeconvKernelTable>> {
    grid.members().par_iter().map(|h| build_deconv_kernel_auto(kernel, model, h, plan)).collect()
}

/// The sample sorted along the first axis, for windowed summation.
#[derive(Debug, Clone)]
pub struct SortedSample {
    points: Vec<f64>,
    keys: Vec<f64>,
    dim: usize,
    n: usize,
}

impl SortedSample {
    pub fn new(sample: &Sample) -> Self {
        let d = sample.dim();
        let mut order: Vec<usize> = (0..sample.n()).collect();
        order.sort_by(|&a, &b| sample.point(a)[0].total_cmp(&sample.point(b)[0]).then(a.cmp(&b)));
        let mut points = Vec::with_capacity(sample.points().len());
        for &i in &order {
            points.extend_from_slice(sample.point(i));
        }
        let keys = order.iter().map(|&i| sample.point(i)[0]).collect();
        SortedSample { points, keys, dim: d, n: sample.n() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(Σ M(Z_i − x), Σ M²(Z_i − x))` over observations whose first
    /// coordinate can reach the table's support.
    pub fn sums(&self, table: &DeconvKernelTable, x: &[f64]) -> (f64, f64) {
        let (lo, hi) = table.reach(0);
        let start = self.keys.partition_point(|&k| k - x[0] < lo);
        let end = self.keys.partition_point(|&k| k - x[0] <= hi);
        let (mut s1, mut s2) = (0.0, 0.0);
        if self.dim == 1 {
            for &z in &self.keys[start..end] {
                let m = table.eval(&[z - x[0]]);
                s1 += m;
                s2 += m * m;
            }
        } else {
            let mut y = vec![0.0; self.dim];
            for i in start..end {
                let z = &self.points[i * self.dim..(i + 1) * self.dim];
                for ((yj, zj), xj) in y.iter_mut().zip(z).zip(x) {
                    *yj = zj - xj;
                }
                let m = table.eval(&y);
                s1 += m;
                s2 += m * m;
            }
        }
        (s1, s2)
    }
}

/// `f̂_h`, `σ̂²`, `Û_n`, `Û*_n` for every evaluation point and grid member.
/// Matrices are row-major `m × |grid|`.
#[derive(Debug, Clone)]
pub struct EstimatorSurface {
    grid: BandwidthGrid,
    eval_points: Vec<f64>,
    dim: usize,
    n: usize,
    p: f64,
    pub f_hat: Vec<f64>,
    pub sigma2_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub u_hat_star: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Suprema of `u` over the upper sets of the grid.
pub fn upper_suprema(grid: &BandwidthGrid, u: &[f64]) -> Vec<f64> {
    let g = grid.len();
    let mut star = vec![0.0; g];
    if grid.is_step_connected() {
        // Members are sorted by V_h descending, so covers come first.
        for a in 0..g {
            star[a] = grid.covers(a).iter().fold(u[a], |acc, &c| acc.max(star[c]));
        }
    } else {
        for a in 0..g {
            star[a] = grid.upper_set(a).iter().fold(f64::NEG_INFINITY, |acc, &b| acc.max(u[b]));
        }
    }
    star
}

/// Fills the surface; rows are computed in parallel.
pub fn build_surface(
    sample: &Sample,
    grid: &BandwidthGrid,
    tables: &[DeconvKernelTable],
    eval_points: &[f64],
    consts: &KernelConstants,
    p: f64,
) -> Result<EstimatorSurface> {
    let d = sample.dim();
    if grid.dim() != d || eval_points.len() % d != 0 {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: sample {d}, grid {}, {} evaluation coordinates",
            grid.dim(),
            eval_points.len()
        )));
    }
    if tables.len() != grid.len() {
        return Err(Error::InvalidInput(format!("{} tables for {} grid members", tables.len(), grid.len())));
    }
    for (i, t) in tables.iter().enumerate() {
        let same = t.dim() == d && t.h().iter().zip(grid.h(i)).all(|(a, b)| (a - b).abs() <= 1e-12 * b);
        if !same {
            return Err(Error::InvalidInput(format!("table {i} has h = {:?}, grid member is {:?}", t.h(), grid.h(i))));
        }
    }
    let n = sample.n();
    let g = grid.len();
    let m = eval_points.len() / d;
    let lambda: Vec<f64> = grid.members().iter().map(|h| lambda_n(h, n, p, consts)).collect();
    let sorted = SortedSample::new(sample);
    let inv_n = 1.0 / n as f64;

    let rows: Vec<[Vec<f64>; 4]> = eval_points
        .par_chunks(d)
        .map(|x| {
            let mut f = vec![0.0; g];
            let mut s2 = vec![0.0; g];
            let mut u = vec![0.0; g];
            for a in 0..g {
                let (sum, sq) = sorted.sums(&tables[a], x);
                f[a] = sum * inv_n;
                s2[a] = sq * inv_n;
                u[a] = u_hat(lambda[a], s2[a], grid.h(a), n, consts);
            }
            let star = upper_suprema(grid, &u);
            [f, s2, u, star]
        })
        .collect();

    let mut surface = EstimatorSurface {
        grid: grid.clone(),
        eval_points: eval_points.to_vec(),
        dim: d,
        n,
        p,
        f_hat: Vec::with_capacity(m * g),
        sigma2_hat: Vec::with_capacity(m * g),
        u_hat: Vec::with_capacity(m * g),
        u_hat_star: Vec::with_capacity(m * g),
        lambda,
    };
    for [f, s2, u, star] in rows {
        surface.f_hat.extend(f);
        surface.sigma2_hat.extend(s2);
        surface.u_hat.extend(u);
        surface.u_hat_star.extend(star);
    }
    Ok(surface)
}

impl EstimatorSurface {
    pub fn grid(&self) -> &BandwidthGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.eval_points.len() / self.dim
    }

    pub fn eval_points(&self) -> &[f64] {
        &self.eval_points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.eval_points[i * self.dim..(i + 1) * self.dim]
    }

    fn row<'a>(&self, v: &'a [f64], i: usize) -> &'a [f64] {
        let g = self.grid.len();
        &v[i * g..(i + 1) * g]
    }

    pub fn f_hat_row(&self, i: usize) -> &[f64] {
        self.row(&self.f_hat, i)
    }

    pub fn sigma2_row(&self, i: usize) -> &[f64] {
        self.row(&self.sigma2_hat, i)
    }

    pub fn u_hat_row(&self, i: usize) -> &[f64] {
        self.row(&self.u_hat, i)
    }

    pub fn u_star_row(&self, i: usize) -> &[f64] {
        self.row(&self.u_hat_star, i)
    }

    /// Long-format CSV: `x…, h…, f_hat, sigma2_hat, u_hat, u_hat_star`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim;
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.extend((1..=d).map(|j| format!("h{j}")));
        header.extend(["f_hat", "sigma2_hat", "u_hat", "u_hat_star"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.rows() {
            for a in 0..self.grid.len() {
                let mut cells: Vec<String> = self.point(i).iter().map(|&v| fmt17(v)).collect();
                cells.extend(self.grid.h(a).iter().map(|&v| fmt17(v)));
                let k = i * self.grid.len() + a;
                cells.extend([self.f_hat[k], self.sigma2_hat[k], self.u_hat[k], self.u_hat_star[k]].map(fmt17));
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
