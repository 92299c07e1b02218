use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::{fft_nd, signed_index};
use super::kernel::KernelSpec;
use crate::error::{Error, Result};
use crate::model::NoiseModel;

/// Highest supported dimension (tables are dense tensor grids).
pub const MAX_DIM: usize = 6;
/// Tolerance of the frequency-domain operator-equation residual.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Largest admissible spectrum magnitude on the band edge.
pub const BAND_EDGE_TOL: f64 = 1e-10;
/// Largest admissible `|M|` on the window boundary for adaptive builds.
pub const BOUNDARY_TOL: f64 = 1e-8;
/// Target multilinear interpolation error for adaptive builds, relative to `max(1, max|grid|)`.
pub const INTERP_TOL: f64 = 2.5e-7;

/// Axis-aligned box `∏[lo_j, hi_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableWindow {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl TableWindow {
    pub fn symmetric(half_width: &[f64]) -> Self {
        TableWindow { lo: half_width.iter().map(|w| -w).collect(), hi: half_width.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }
}

/// How the table represents `M(·,h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Synthesis {
    /// `M = K_h`, evaluated in closed form (`α = 0`).
    Analytic,
    /// `M = K_h/(1−α) + R`, with the smooth remainder `R` synthesised by FFT (`0 < α < 1`).
    AnalyticPlusResidual,
    /// `M` synthesised entirely by FFT (`α = 1`).
    Fft,
}

/// Samples of the deconvolution kernel `M(·,h)` on a regular grid.
///
/// Grid nodes are `lo_j + k·step_j`, `k = 0..resolution_j`, covering the
/// window including both end points; values are stored row-major with the
/// last axis fastest.
#[derive(Debug, Clone)]
pub struct DeconvKernelTable {
    kernel: KernelSpec,
    alpha: f64,
    h: Vec<f64>,
    v_h: f64,
    window: TableWindow,
    resolution: Vec<usize>,
    step: Vec<f64>,
    strides: Vec<usize>,
    analytic_weight: f64,
    grid: Vec<f64>,
    synthesis: Synthesis,
    fourier_residual: f64,
    band_edge: f64,
    boundary: f64,
    interp_error: f64,
}

fn check_inputs(kernel: &KernelSpec, model: &NoiseModel, h: &[f64], window: &TableWindow, resolution: &[usize]) -> Result<()> {
    let d = kernel.dim;
    if d == 0 || d > MAX_DIM {
        return Err(Error::Unsupported(format!("tables support 1..={MAX_DIM} dimensions, got {d}")));
    }
    if model.dim() != d || h.len() != d || window.dim() != d || window.hi.len() != d || resolution.len() != d {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: kernel {d}, model {}, h {}, window {}, resolution {}",
            model.dim(),
            h.len(),
            window.dim(),
            resolution.len()
        )));
    }
    if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidInput(format!("bandwidths must be positive and finite, got {bad}")));
    }
    if let Some(bad) = resolution.iter().find(|n| !n.is_power_of_two() || **n < 4) {
        return Err(Error::InvalidInput(format!("resolution must be a power of two >= 4, got {bad}")));
    }
    for j in 0..d {
        let reach = 4.0 * kernel.support_radius() * h[j];
        let slack = 1e-12 * reach.max(1.0);
        if !(window.lo[j] <= -reach + slack && window.hi[j] >= reach - slack) {
            return Err(Error::InvalidInput(format!(
                "window axis {j} [{}, {}] must contain [-{reach}, {reach}]",
                window.lo[j], window.hi[j]
            )));
        }
    }
    Ok(())
}

fn strides_of(resolution: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; resolution.len()];
    for j in (0..resolution.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * resolution[j + 1];
    }
    strides
}

/// Decomposes a flat row-major index into per-axis indices.
fn unflatten(mut flat: usize, resolution: &[usize], out: &mut [usize]) {
    for j in (0..resolution.len()).rev() {
        out[j] = flat % resolution[j];
        flat /= resolution[j];
    }
}

/// Synthesises `M(·,h)` from `M̌(t,h) = Ǩ(t·h)/[(1−α) + α·ǧ(−t)]`.
///
/// `α = 0` is handled analytically. For `0 < α < 1` the closed-form part
/// `K_h/(1−α)` is split off and only the remainder, whose spectrum
/// `Ǩ(t·h)[1/D(t) − 1/(1−α)]` carries the decay of `ǧ`, goes through the
/// FFT. For `α = 1` the whole spectrum is inverted numerically.
pub fn build_deconv_kernel(
    kernel: &KernelSpec,
    model: &NoiseModel,
    h: &[f64],
    window: &TableWindow,
    resolution: &[usize],
) -> Result<DeconvKernelTable> {
    check_inputs(kernel, model, h, window, resolution)?;
    let d = kernel.dim;
    let alpha = model.alpha();
    let step: Vec<f64> = (0..d).map(|j| (window.hi[j] - window.lo[j]) / (resolution[j] - 1) as f64).collect();
    let mut table = DeconvKernelTable {
        kernel: *kernel,
        alpha,
        h: h.to_vec(),
        v_h: h.iter().product(),
        window: window.clone(),
        resolution: resolution.to_vec(),
        step,
        strides: strides_of(resolution),
        analytic_weight: 1.0,
        grid: Vec::new(),
        synthesis: Synthesis::Analytic,
        fourier_residual: 0.0,
        band_edge: 0.0,
        boundary: 0.0,
        interp_error: 0.0,
    };
    if alpha == 0.0 {
        return Ok(table);
    }
    if model.margin().is_none() {
        return Err(Error::NotCertified);
    }
    let (weight, synthesis) = if alpha < 1.0 {
        (1.0 / (1.0 - alpha), Synthesis::AnalyticPlusResidual)
    } else {
        (0.0, Synthesis::Fft)
    };
    table.analytic_weight = weight;
    table.synthesis = synthesis;

    let total: usize = resolution.iter().product();
    // Per-axis frequencies, kernel transforms and the phase that shifts the grid origin to `lo`.
    let freqs: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let dt = 2.0 * std::f64::consts::PI / (resolution[j] as f64 * table.step[j]);
            (0..resolution[j]).map(|l| signed_index(l, resolution[j]) * dt).collect()
        })
        .collect();
    let khat_axis: Vec<Vec<f64>> = (0..d).map(|j| freqs[j].iter().map(|&t| kernel.base.fourier(t * h[j])).collect()).collect();

    let mut spectrum = vec![Complex64::new(0.0, 0.0); total];
    let mut symbols = vec![Complex64::new(0.0, 0.0); total];
    let mut khat = vec![0.0; total];
    let mut idx = vec![0usize; d];
    let mut t = vec![0.0; d];
    let (mut s_max, mut s_edge, mut k_edge) = (0.0f64, 0.0f64, 0.0f64);
    for flat in 0..total {
        unflatten(flat, resolution, &mut idx);
        let mut kv = 1.0;
        let mut phase = 0.0;
        let mut on_edge = false;
        for j in 0..d {
            t[j] = freqs[j][idx[j]];
            kv *= khat_axis[j][idx[j]];
            phase += t[j] * window.lo[j];
            on_edge |= idx[j] == resolution[j] / 2;
        }
        let sym = model.operator_symbol(&t)?;
        if !(sym.norm() > 0.0) || !sym.is_finite() {
            return Err(Error::AssumptionViolated(format!("operator symbol vanishes at t = {t:?}")));
        }
        let s = kv / sym - weight * kv;
        s_max = s_max.max(s.norm());
        if on_edge {
            s_edge = s_edge.max(s.norm());
            k_edge = k_edge.max(kv.abs());
        }
        spectrum[flat] = s * Complex64::from_polar(1.0, phase);
        symbols[flat] = sym;
        khat[flat] = kv;
    }
    table.band_edge = if synthesis == Synthesis::Fft { k_edge.max(s_edge / s_max.max(1.0)) } else { s_edge / s_max.max(1.0) };
    if table.band_edge > BAND_EDGE_TOL {
        return Err(Error::BandTooNarrow(format!(
            "spectrum at the band edge is {:.3e} (limit {BAND_EDGE_TOL:.0e}); raise the resolution or shrink the window",
            table.band_edge
        )));
    }

    fft_nd(&mut spectrum, resolution, true);
    let scale: f64 = (0..d).map(|j| 1.0 / (resolution[j] as f64 * table.step[j])).product();
    table.grid = spectrum.iter().map(|c| c.re * scale).collect();

    // Residual of the operator equation on the discrete band, recomputed from the stored grid.
    let mut back: Vec<Complex64> = table.grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut back, resolution, false);
    let cell: f64 = table.step.iter().product();
    let mut worst = 0.0f64;
    for (flat, b) in back.iter().enumerate() {
        unflatten(flat, resolution, &mut idx);
        let phase: f64 = (0..d).map(|j| -freqs[j][idx[j]] * window.lo[j]).sum();
        let m_hat = b * cell * Complex64::from_polar(1.0, phase) + weight * khat[flat];
        let r = (m_hat * symbols[flat] - khat[flat]).norm() / (1.0 + khat[flat].abs());
        worst = worst.max(r);
    }
    table.fourier_residual = worst;
    if !(worst <= RESIDUAL_TOL) {
        return Err(Error::BandTooNarrow(format!(
            "operator-equation residual {worst:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }

    let mut boundary = 0.0f64;
    for (flat, v) in table.grid.iter().enumerate() {
        unflatten(flat, resolution, &mut idx);
        if idx.iter().zip(resolution).any(|(&i, &n)| i == 0 || i == n - 1) {
            boundary = boundary.max(v.abs());
        }
    }
    table.boundary = boundary;
    table.interp_error = interpolation_error(&table.grid, resolution, &table.strides);
    Ok(table)
}

/// Estimated multilinear interpolation error `Σ_j max|Δ_j² ∂_j² g| / 8`,
/// relative to `max(1, max|g|)`.
fn interpolation_error(grid: &[f64], resolution: &[usize], strides: &[usize]) -> f64 {
    let mut idx = vec![0usize; resolution.len()];
    let mut total = 0.0;
    for (j, (&n, &s)) in resolution.iter().zip(strides).enumerate() {
        let mut worst = 0.0f64;
        for flat in 0..grid.len() {
            unflatten(flat, resolution, &mut idx);
            if idx[j] == 0 || idx[j] == n - 1 {
                continue;
            }
            worst = worst.max((grid[flat + s] - 2.0 * grid[flat] + grid[flat - s]).abs());
        }
        total += worst / 8.0;
    }
    let scale = grid.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    total / scale
}

/// Default FFT resolution per axis.
pub fn default_resolution(d: usize) -> usize {
    match d {
        1 => 1 << 12,
        2 => 1 << 9,
        _ => 1 << 6,
    }
}

/// Starting point and limits for [`build_deconv_kernel_auto`].
#[derive(Debug, Clone, Default)]
pub struct SynthesisPlan {
    pub resolution: Option<Vec<usize>>,
    pub half_width: Option<Vec<f64>>,
    /// Cap on the total number of grid nodes.
    pub max_points: Option<usize>,
}

/// Builds a table, doubling resolution while the band is too narrow,
/// widening the window while `|M|` on its boundary exceeds [`BOUNDARY_TOL`],
/// and refining the grid while the interpolation error exceeds
/// [`INTERP_TOL`]. The last refinement is best effort: at the node cap the
/// table is returned with its error recorded.
pub fn build_deconv_kernel_auto(kernel: &KernelSpec, model: &NoiseModel, h: &[f64], plan: &SynthesisPlan) -> Result<DeconvKernelTable> {
    let d = kernel.dim;
    let pad = if model.alpha() > 0.0 && model.alpha() < 1.0 { 10.0 * model.noise_sd().unwrap_or(1.0) } else { 0.0 };
    let mut half = plan
        .half_width
        .clone()
        .unwrap_or_else(|| h.iter().map(|&hj| 4.0 * kernel.support_radius() * hj + pad).collect());
    let mut res = plan.resolution.clone().unwrap_or_else(|| vec![default_resolution(d); d]);
    let cap = plan.max_points.unwrap_or(if d == 1 { 1 << 22 } else { 1 << 20 });
    let fits = |r: &[usize]| r.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).is_some_and(|t| t <= cap);
    if !fits(&res) {
        return Err(Error::InvalidInput(format!("resolution {res:?} exceeds the node cap {cap}")));
    }
    loop {
        match build_deconv_kernel(kernel, model, h, &TableWindow::symmetric(&half), &res) {
            Ok(table) if table.boundary <= BOUNDARY_TOL => {
                let finer: Vec<usize> = res.iter().map(|n| 2 * n).collect();
                if table.interp_error <= INTERP_TOL || !fits(&finer) {
                    return Ok(table);
                }
                res = finer;
            }
            Ok(table) => {
                let wider: Vec<usize> = res.iter().map(|n| 2 * n).collect();
                if !fits(&wider) {
                    return Err(Error::BandTooNarrow(format!(
                        "|M| on the window boundary is {:.3e} and the window cannot grow within {cap} nodes",
                        table.boundary
                    )));
                }
                half.iter_mut().for_each(|w| *w *= 2.0);
                res = wider;
            }
            Err(Error::BandTooNarrow(msg)) => {
                let finer: Vec<usize> = res.iter().map(|n| 2 * n).collect();
                if !fits(&finer) {
                    return Err(Error::BandTooNarrow(format!("{msg} (node cap {cap} reached)")));
                }
                res = finer;
            }
            Err(e) => return Err(e),
        }
    }
}

impl DeconvKernelTable {
    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `V_h = ∏ h_j`.
    pub fn v_h(&self) -> f64 {
        self.v_h
    }

    pub fn window(&self) -> &TableWindow {
        &self.window
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn step(&self) -> &[f64] {
        &self.step
    }

    pub fn synthesis(&self) -> Synthesis {
        self.synthesis
    }

    /// Largest relative operator-equation residual found at construction.
    pub fn fourier_residual(&self) -> f64 {
        self.fourier_residual
    }

    /// Relative spectrum magnitude on the band edge.
    pub fn band_edge(&self) -> f64 {
        self.band_edge
    }

    /// Largest `|M|` on the window boundary (the declared truncation error).
    pub fn boundary_magnitude(&self) -> f64 {
        self.boundary
    }

    /// Estimated relative interpolation error of the synthesised part.
    pub fn interpolation_error(&self) -> f64 {
        self.interp_error
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        unflatten(flat, &self.resolution, &mut idx);
        idx.iter().enumerate().map(|(j, &i)| self.window.lo[j] + i as f64 * self.step[j]).collect()
    }

    /// Per-axis interval outside which the table evaluates to zero.
    pub fn reach(&self, j: usize) -> (f64, f64) {
        if self.synthesis == Synthesis::Analytic {
            let r = self.kernel.support_radius() * self.h[j];
            (self.window.lo[j].max(-r), self.window.hi[j].min(r))
        } else {
            (self.window.lo[j], self.window.hi[j])
        }
    }

    /// `M(·,h)` at every grid node.
    pub fn values(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|flat| {
                let y = self.node(flat);
                let grid = self.grid.get(flat).copied().unwrap_or(0.0);
                self.analytic_part(&y) + grid
            })
            .collect()
    }

    fn analytic_part(&self, y: &[f64]) -> f64 {
        if self.analytic_weight == 0.0 {
            0.0
        } else {
            self.analytic_weight * self.kernel.scaled(y, &self.h)
        }
    }

    /// Fractional position of `y` along axis `j`, snapped to nodes.
    #[inline]
    fn locate(&self, j: usize, y: f64) -> (usize, f64) {
        let mut s = (y - self.window.lo[j]) / self.step[j];
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            s = r;
        }
        let i = (s.floor() as usize).min(self.resolution[j] - 2);
        (i, s - i as f64)
    }

    fn interpolate(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        if d == 1 {
            let (i, f) = self.locate(0, y[0]);
            let a = self.grid[i];
            return if f == 0.0 { a } else { a + f * (self.grid[i + 1] - a) };
        }
        let mut base = 0usize;
        let mut fr = [0.0; MAX_DIM];
        for j in 0..d {
            let (i, f) = self.locate(j, y[j]);
            base += i * self.strides[j];
            fr[j] = f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut off = base;
            for j in 0..d {
                if corner >> j & 1 == 1 {
                    w *= fr[j];
                    off += self.strides[j];
                } else {
                    w *= 1.0 - fr[j];
                }
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                acc += w * self.grid[off];
            }
        }
        acc
    }

    /// `M(y,h)`: closed-form part plus multilinear interpolation of the
    /// synthesised part; zero outside the window.
    pub fn eval(&self, y: &[f64]) -> f64 {
        if !self.window.contains(y) {
            return 0.0;
        }
        let mut v = self.analytic_part(y);
        if !self.grid.is_empty() {
            v += self.interpolate(y);
        }
        v
    }

    /// `max |M|` over the grid nodes.
    pub fn sup_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann-sum `L₂` norm over the grid.
    pub fn l2_norm(&self) -> f64 {
        let cell: f64 = self.step.iter().product();
        (self.values().iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
    }

    /// Riemann-sum integral over the grid.
    pub fn mass(&self) -> f64 {
        let cell: f64 = self.step.iter().product();
        self.values().iter().sum::<f64>() * cell
    }

    /// Binary grid dump: little-endian `f64` words holding `d`, the
    /// resolution, the window lows and highs, `h`, then the node values.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let mut words = vec![self.dim() as f64];
        words.extend(self.resolution.iter().map(|&n| n as f64));
        words.extend(&self.window.lo);
        words.extend(&self.window.hi);
        words.extend(&self.h);
        words.extend(self.values());
        let mut bytes = Vec::with_capacity(words.len() * 8);
        for w in words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn save_dump(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_dump(std::io::BufWriter::new(file))
    }
}

/// A decoded binary grid dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDump {
    pub resolution: Vec<usize>,
    pub window: TableWindow,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
}

impl TableDump {
    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 || bytes.is_empty() {
            return Err(Error::Parse("table dump length is not a whole number of f64 words".into()));
        }
        let words: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let d = words[0] as usize;
        let header = 1 + 4 * d;
        if d == 0 || words.len() < header {
            return Err(Error::Parse("truncated table dump header".into()));
        }
        let resolution: Vec<usize> = words[1..1 + d].iter().map(|&v| v as usize).collect();
        let lo = words[1 + d..1 + 2 * d].to_vec();
        let hi = words[1 + 2 * d..1 + 3 * d].to_vec();
        let h = words[1 + 3 * d..header].to_vec();
        let values = words[header..].to_vec();
        if values.len() != resolution.iter().product::<usize>() {
            return Err(Error::Parse(format!("dump holds {} values, header promises {resolution:?}", values.len())));
        }
        Ok(TableDump { resolution, window: TableWindow { lo, hi }, h, values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
