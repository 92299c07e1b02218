//! Finite truncations of the exponential bandwidth lattice `{e^k}^d`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default admissibility cap on `G_n(h)`.
pub const G_CAP: f64 = 1.0;
/// Full-mode grids whose squared size exceeds this trigger a warning downstream.
pub const LARGE_GRID_WARN: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Full,
    Isotropic,
}

impl std::str::FromStr for GridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(GridMode::Full),
            "isotropic" => Ok(GridMode::Isotropic),
            other => Err(Error::InvalidInput(format!("grid mode must be 'full' or 'isotropic', got '{other}'"))),
        }
    }
}

/// Optional overrides of the shared exponent range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRange {
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
}

fn log_sum_and_scale(h: &[f64], gamma: &[f64]) -> (f64, f64) {
    let logs: f64 = h.iter().map(|v| v.ln().abs()).sum();
    let scale: f64 = h.iter().zip(gamma).map(|(&v, &g)| v * v.min(1.0).powf(g)).product();
    (logs, scale)
}

/// `(F_n(h), G_n(h))`.
pub fn fn_gn(h: &[f64], n: usize, gamma: &[f64]) -> (f64, f64) {
    let (logs, scale) = log_sum_and_scale(h, gamma);
    let ln_n = (n as f64).ln();
    let f = (ln_n + logs).sqrt() / ((n as f64).sqrt() * scale.sqrt() * root_gamma_correction(h, gamma));
    let g = (ln_n + logs) / (n as f64 * scale);
    (f, g)
}

/// `F_n` carries `h_j^{1/2}(h_j∧1)^{γ_j}`, not the square root of the `G_n`
/// denominator; this restores the missing half power of `(h_j∧1)^{γ_j}`.
fn root_gamma_correction(h: &[f64], gamma: &[f64]) -> f64 {
    h.iter().zip(gamma).map(|(&v, &g)| v.min(1.0).powf(0.5 * g)).product()
}

/// A finite, join-closed set of multi-bandwidths `h = (e^{k_1}, …, e^{k_d})`.
#[derive(Debug, Clone)]
pub struct BandwidthGrid {
    mode: GridMode,
    k_min: i32,
    k_max: i32,
    n: usize,
    gamma: Vec<f64>,
    g_cap: f64,
    exponents: Vec<Vec<i32>>,
    members: Vec<Vec<f64>>,
    index: HashMap<Vec<i32>, usize>,
    /// `join[a * len + b]` is the index of `h_a ∨ h_b`.
    join: Vec<usize>,
    /// For each member, the members `η ≥ h` (itself included).
    upper: Vec<Vec<usize>>,
    /// For each member, the members one lattice step above it along some axis.
    covers: Vec<Vec<usize>>,
    /// Whether every `η ≥ h` is reachable from `h` by single lattice steps
    /// inside the grid, which makes suprema over upper sets computable by
    /// a sweep over `covers`.
    step_connected: bool,
}

/// Smallest `k ≤ k_max` whose isotropic bandwidth keeps `G_n ≤ cap`.
fn default_k_min(n: usize, d: usize, gamma: &[f64], k_max: i32, cap: f64) -> i32 {
    let mut k = k_max;
    loop {
        let h = vec![((k - 1) as f64).exp(); d];
        if fn_gn(&h, n, gamma).1 > cap || k - 1 < -200 {
            return k;
        }
        k -= 1;
    }
}

/// Enumerates `[k_min, k_max]^d` (full) or its diagonal (isotropic), keeping
/// members with `G_n(h) ≤ 1`.
pub fn build_grid(n: usize, d: usize, gamma: &[f64], mode: GridMode, overrides: GridRange) -> Result<BandwidthGrid> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("grid needs n >= 3, got {n}")));
    }
    if d == 0 || gamma.len() != d {
        return Err(Error::InvalidInput(format!("gamma must have {d} entries, got {}", gamma.len())));
    }
    let k_max = overrides.k_max.unwrap_or(0);
    let k_min = overrides.k_min.unwrap_or_else(|| default_k_min(n, d, gamma, k_max, G_CAP));
    if k_min > k_max {
        return Err(Error::EmptyGrid(format!("empty exponent range [{k_min}, {k_max}]")));
    }
    let width = (k_max - k_min + 1) as usize;
    let mut exponents = Vec::new();
    match mode {
        GridMode::Isotropic => exponents.extend((k_min..=k_max).map(|k| vec![k; d])),
        GridMode::Full => {
            let total = width.checked_pow(d as u32).filter(|t| *t <= 50_000_000).ok_or_else(|| {
                Error::InvalidInput(format!("full grid of {width}^{d} members is too large; use isotropic mode"))
            })?;
            for mut flat in 0..total {
                let mut k = vec![0; d];
                for slot in k.iter_mut().rev() {
                    *slot = k_min + (flat % width) as i32;
                    flat /= width;
                }
                exponents.push(k);
            }
        }
    }
    exponents.retain(|k| {
        let h: Vec<f64> = k.iter().map(|&v| (v as f64).exp()).collect();
        fn_gn(&h, n, gamma).1 <= G_CAP
    });
    if exponents.is_empty() {
        return Err(Error::EmptyGrid(format!(
            "no bandwidth in [e^{k_min}, e^{k_max}]^{d} satisfies G_n(h) <= {G_CAP} at n = {n}"
        )));
    }
    BandwidthGrid::assemble(mode, k_min, k_max, n, gamma.to_vec(), exponents)
}

impl BandwidthGrid {
    /// A grid from explicit exponent vectors. The set must be closed under
    /// coordinatewise maxima, since the selection statistic compares `h ∨ η`.
    pub fn from_exponents(mode: GridMode, exponents: Vec<Vec<i32>>, n: usize, gamma: Vec<f64>) -> Result<Self> {
        let d = gamma.len();
        if exponents.is_empty() {
            return Err(Error::EmptyGrid("no members supplied".into()));
        }
        if let Some(bad) = exponents.iter().find(|k| k.len() != d) {
            return Err(Error::InvalidInput(format!("member {bad:?} does not have {d} coordinates")));
        }
        if mode == GridMode::Isotropic {
            if let Some(bad) = exponents.iter().find(|k| k.iter().any(|&v| v != k[0])) {
                return Err(Error::InvalidInput(format!("isotropic member {bad:?} is not diagonal")));
            }
        }
        let k_min = *exponents.iter().flatten().min().expect("non-empty");
        let k_max = *exponents.iter().flatten().max().expect("non-empty");
        let mut unique = exponents;
        unique.sort();
        unique.dedup();
        Self::assemble(mode, k_min, k_max, n, gamma, unique)
    }

    fn assemble(mode: GridMode, k_min: i32, k_max: i32, n: usize, gamma: Vec<f64>, mut exponents: Vec<Vec<i32>>) -> Result<Self> {
        // Largest V_h first, ties broken lexicographically.
        exponents.sort_by(|a, b| {
            let (sa, sb): (i32, i32) = (a.iter().sum(), b.iter().sum());
            sb.cmp(&sa).then_with(|| a.cmp(b))
        });
        let members: Vec<Vec<f64>> = exponents.iter().map(|k| k.iter().map(|&v| (v as f64).exp()).collect()).collect();
        let index: HashMap<Vec<i32>, usize> = exponents.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let m = exponents.len();
        let mut join = vec![0usize; m * m];
        let mut upper = vec![Vec::new(); m];
        for a in 0..m {
            for b in 0..m {
                let k: Vec<i32> = exponents[a].iter().zip(&exponents[b]).map(|(&x, &y)| x.max(y)).collect();
                join[a * m + b] = *index.get(&k).ok_or_else(|| {
                    Error::LatticeClosureViolated(format!(
                        "{:?} ∨ {:?} = {k:?} is not a grid member",
                        exponents[a], exponents[b]
                    ))
                })?;
                if exponents[b].iter().zip(&exponents[a]).all(|(x, y)| x >= y) {
                    upper[a].push(b);
                }
            }
        }
        let d = gamma.len();
        let covers: Vec<Vec<usize>> = exponents
            .iter()
            .map(|k| {
                (0..d)
                    .filter_map(|j| {
                        let mut up = k.clone();
                        up[j] += 1;
                        if mode == GridMode::Isotropic {
                            up = vec![k[0] + 1; d];
                        }
                        index.get(&up).copied()
                    })
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect();
        // Inductive check: each strictly larger member of the upper set is
        // above some cover.
        let step_connected = (0..m).all(|a| {
            upper[a].iter().all(|&b| {
                b == a || covers[a].iter().any(|&c| exponents[c].iter().zip(&exponents[b]).all(|(x, y)| x <= y))
            })
        });
        Ok(BandwidthGrid {
            mode,
            k_min,
            k_max,
            n,
            gamma,
            g_cap: G_CAP,
            exponents,
            members,
            index,
            join,
            upper,
            covers,
            step_connected,
        })
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn g_cap(&self) -> f64 {
        self.g_cap
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn h(&self, i: usize) -> &[f64] {
        &self.members[i]
    }

    pub fn exponents(&self, i: usize) -> &[i32] {
        &self.exponents[i]
    }

    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        self.index.get(k).copied()
    }

    /// Index of `h_a ∨ h_b`.
    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a * self.len() + b]
    }

    /// Indices of the members `η ≥ h_a`.
    pub fn upper_set(&self, a: usize) -> &[usize] {
        &self.upper[a]
    }

    /// Members one lattice step above `h_a` (the diagonal step in isotropic mode).
    pub fn covers(&self, a: usize) -> &[usize] {
        &self.covers[a]
    }

    pub fn is_step_connected(&self) -> bool {
        self.step_connected
    }

    /// Whether `h_a` has an exponent on the edge of the truncated range.
    pub fn on_boundary(&self, a: usize) -> bool {
        self.exponents[a].iter().any(|&k| k == self.k_min || k == self.k_max)
    }

    pub fn describe(&self) -> GridSummary {
        let (mut f_min, mut f_max, mut g_min, mut g_max) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
        for h in &self.members {
            let (f, g) = fn_gn(h, self.n, &self.gamma);
            f_min = f_min.min(f);
            f_max = f_max.max(f);
            g_min = g_min.min(g);
            g_max = g_max.max(g);
        }
        GridSummary {
            mode: self.mode,
            d: self.dim(),
            n: self.n,
            k_min: self.k_min,
            k_max: self.k_max,
            members: self.len(),
            f_min,
            f_max,
            g_min,
            g_max,
        }
    }
}

/// Printable grid digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub mode: GridMode,
    pub d: usize,
    pub n: usize,
    pub k_min: i32,
    pub k_max: i32,
    pub members: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub g_min: f64,
    pub g_max: f64,
}

impl fmt::Display for GridSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            GridMode::Full => "full",
            GridMode::Isotropic => "isotropic",
        };
        writeln!(f, "{:<10} {}", "mode", mode)?;
        writeln!(f, "{:<10} {}", "d", self.d)?;
        writeln!(f, "{:<10} {}", "n", self.n)?;
        writeln!(f, "{:<10} [{}, {}]", "k-range", self.k_min, self.k_max)?;
        writeln!(f, "{:<10} {}", "members", self.members)?;
        writeln!(f, "{:<10} [{:.6e}, {:.6e}]", "F_n", self.f_min, self.f_max)?;
        write!(f, "{:<10} [{:.6e}, {:.6e}]", "G_n", self.g_min, self.g_max)
    }
}
