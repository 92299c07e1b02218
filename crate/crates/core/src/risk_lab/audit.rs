//! Monte Carlo audits of the stochastic building blocks: unbiasedness of
//! `f̂_h` for `K_h ⋆ f`, and the concentration bounds around `U_n`.

use rayon::prelude::*;
use serde::Serialize;

use super::truth::{observation_quantile, smoothed_truth, true_sigma2};
use crate::bandwidth_grid::BandwidthGrid;
use crate::error::{Error, Result};
use crate::estimator_bank::{lambda_n, u_hat, SortedSample};
use crate::kernel_lab::{build_deconv_kernel_auto, kernel_constants, DeconvKernelTable, KernelSpec, SynthesisPlan};
use crate::model::{sample_model, NoiseModel, TargetSpec};
use crate::util::derive_seed;

/// Probe points at the given marginal quantiles of `𝔭`, taken along the
/// diagonal in `d ≥ 2` (every coordinate at the same level).
pub fn quantile_probes(target: &TargetSpec, model: &NoiseModel, levels: &[f64]) -> Result<Vec<f64>> {
    let d = target.dim();
    let mut out = Vec::with_capacity(levels.len() * d);
    for &q in levels {
        for j in 0..d {
            out.push(observation_quantile(target, model, j, q)?);
        }
    }
    Ok(out)
}

fn tables_for(kernel: &KernelSpec, model: &NoiseModel, hs: &[Vec<f64>]) -> Result<Vec<DeconvKernelTable>> {
    hs.par_iter().map(|h| build_deconv_kernel_auto(kernel, model, h, &SynthesisPlan::default())).collect()
}

fn check_probes(d: usize, probes: &[f64]) -> Result<usize> {
    if d == 0 || probes.is_empty() || probes.len() % d != 0 {
        return Err(Error::InvalidInput(format!("{} probe coordinates do not form {d}-dimensional points", probes.len())));
    }
    Ok(probes.len() / d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessRow {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    /// `(K_h ⋆ f)(x)` by quadrature.
    pub truth: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    /// `(mc_mean − truth) / std_error`.
    pub z: f64,
}

/// Compares the Monte Carlo mean of `f̂_h(x)` with `(K_h ⋆ f)(x)`.
#[allow(clippy::too_many_arguments)]
pub fn unbiasedness_check(
    target: &TargetSpec,
    model: &NoiseModel,
    kernel: &KernelSpec,
    hs: &[Vec<f64>],
    probes: &[f64],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<UnbiasednessRow>> {
    let d = kernel.dim;
    let m = check_probes(d, probes)?;
    if replicates < 2 {
        return Err(Error::InvalidInput("unbiasedness needs at least two replicates".into()));
    }
    let tables = tables_for(kernel, model, hs)?;
    let per_rep: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let sample = sample_model(target, model, n, derive_seed(seed, 0, r as u64))?;
            let sorted = SortedSample::new(&sample);
            let mut v = Vec::with_capacity(m * hs.len());
            for x in probes.chunks(d) {
                for t in &tables {
                    v.push(sorted.sums(t, x).0 / n as f64);
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let r = replicates as f64;
    let mut rows = Vec::with_capacity(m * hs.len());
    for (i, x) in probes.chunks(d).enumerate() {
        for (a, h) in hs.iter().enumerate() {
            let idx = i * hs.len() + a;
            let mean = per_rep.iter().map(|v| v[idx]).sum::<f64>() / r;
            let var = per_rep.iter().map(|v| (v[idx] - mean).powi(2)).sum::<f64>() / (r - 1.0);
            let se = (var / r).sqrt();
            let truth = smoothed_truth(target, kernel, h, x)?;
            rows.push(UnbiasednessRow { x: x.to_vec(), h: h.clone(), truth, mc_mean: mean, std_error: se, z: (mean - truth) / se });
        }
    }
    Ok(rows)
}

/// Exceedance frequencies at one `(x, h)` probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceRow {
    pub x: Vec<f64>,
    pub k: Vec<i32>,
    pub h: Vec<f64>,
    /// `S_h(x, f)`.
    pub smoothed: f64,
    /// `σ²(x, h)` under the true observation density.
    pub sigma2: f64,
    pub u_n: f64,
    /// Frequency of `|f̂_h(x) − S_h(x,f)| > U_n(x,h)`.
    pub xi_exceeds_u: f64,
    /// Frequency of `Û_n(x,h) > 3U_n(x,h)`.
    pub u_hat_exceeds_3u: f64,
    /// Frequency of `U_n(x,h) > 4Û_n(x,h)`.
    pub u_exceeds_4u_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationAudit {
    pub n: usize,
    pub replicates: usize,
    pub p: f64,
    pub rows: Vec<ExceedanceRow>,
}

impl ConcentrationAudit {
    pub fn max_xi(&self) -> f64 {
        self.rows.iter().map(|r| r.xi_exceeds_u).fold(0.0, f64::max)
    }

    pub fn max_u_hat(&self) -> f64 {
        self.rows.iter().map(|r| r.u_hat_exceeds_3u).fold(0.0, f64::max)
    }

    pub fn max_u(&self) -> f64 {
        self.rows.iter().map(|r| r.u_exceeds_4u_hat).fold(0.0, f64::max)
    }
}

/// Frequencies, over `replicates` samples of size `n`, of the three events
/// bounded by the concentration proposition, at every probe and every
/// member of `grid`. `U_n` uses the exact `σ²` by quadrature.
#[allow(clippy::too_many_arguments)]
pub fn concentration_audit(
    target: &TargetSpec,
    model: &NoiseModel,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    probes: &[f64],
    n: usize,
    replicates: usize,
    p: f64,
    seed: u64,
) -> Result<ConcentrationAudit> {
    let d = kernel.dim;
    let m = check_probes(d, probes)?;
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be positive".into()));
    }
    let consts = kernel_constants(kernel, model, p)?;
    let g = grid.len();
    let tables = tables_for(kernel, model, grid.members())?;
    let lambda: Vec<f64> = grid.members().iter().map(|h| lambda_n(h, n, p, &consts)).collect();

    let mut base = Vec::with_capacity(m * g);
    for x in probes.chunks(d) {
        for a in 0..g {
            let h = grid.h(a);
            let smoothed = smoothed_truth(target, kernel, h, x)?;
            let sigma2 = true_sigma2(target, model, &tables[a], x)?;
            let u_n = u_hat(lambda[a], sigma2, h, n, &consts);
            base.push((smoothed, sigma2, u_n));
        }
    }

    let counts: Vec<Vec<[u32; 3]>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let sample = sample_model(target, model, n, derive_seed(seed, 1, r as u64))?;
            let sorted = SortedSample::new(&sample);
            let mut c = Vec::with_capacity(m * g);
            for (i, x) in probes.chunks(d).enumerate() {
                for a in 0..g {
                    let (s1, s2) = sorted.sums(&tables[a], x);
                    let f = s1 / n as f64;
                    let uh = u_hat(lambda[a], s2 / n as f64, grid.h(a), n, &consts);
                    let (smoothed, _, u_n) = base[i * g + a];
                    c.push([
                        u32::from((f - smoothed).abs() > u_n),
                        u32::from(uh > 3.0 * u_n),
                        u32::from(u_n > 4.0 * uh),
                    ]);
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let r = replicates as f64;
    let mut rows = Vec::with_capacity(m * g);
    for (i, x) in probes.chunks(d).enumerate() {
        for a in 0..g {
            let idx = i * g + a;
            let mut tot = [0u32; 3];
            for c in &counts {
                for e in 0..3 {
                    tot[e] += c[idx][e];
                }
            }
            let (smoothed, sigma2, u_n) = base[idx];
            rows.push(ExceedanceRow {
                x: x.to_vec(),
                k: grid.exponents(a).to_vec(),
                h: grid.h(a).to_vec(),
                smoothed,
                sigma2,
                u_n,
                xi_exceeds_u: tot[0] as f64 / r,
                u_hat_exceeds_3u: tot[1] as f64 / r,
                u_exceeds_4u_hat: tot[2] as f64 / r,
            });
        }
    }
    Ok(ConcentrationAudit { n, replicates, p, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandwidth_grid::{build_grid, GridMode, GridRange};
    use crate::kernel_lab::BaseKernel;
    use crate::model::{FrequencyProbe, NoiseKind};

    #[test]
    fn direct_case_is_unbiased() {
        let t = TargetSpec::standard_normal(1);
        let m = NoiseModel::direct(1);
        let k = KernelSpec::new(BaseKernel::default(), 1);
        let rows = unbiasedness_check(&t, &m, &k, &[vec![0.5]], &[0.0, 1.0], 400, 60, 3).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!(r.z.abs() < 4.0, "{r:?}");
        }
    }

    #[test]
    fn audit_shapes_and_small_frequencies() {
        let t = TargetSpec::standard_normal(1);
        let mut m = NoiseModel::new(0.5, NoiseKind::Laplace { scale: 1.0 }, 1).unwrap();
        m.certify(&FrequencyProbe::for_band(500.0, 1)).unwrap();
        let k = KernelSpec::new(BaseKernel::default(), 1);
        let n = 500;
        let grid = build_grid(n, 1, &m.gamma(), GridMode::Isotropic, GridRange { k_min: Some(-2), k_max: None }).unwrap();
        let probes = quantile_probes(&t, &m, &[0.5]).unwrap();
        let a = concentration_audit(&t, &m, &k, &grid, &probes, n, 20, 2.0, 9).unwrap();
        assert_eq!(a.rows.len(), grid.len());
        assert!(a.rows.iter().all(|r| r.u_n > 0.0 && r.sigma2 > 0.0));
        assert!(a.max_xi() <= 0.1 && a.max_u_hat() <= 0.1);
        assert!(check_probes(1, &[]).is_err());
    }
}
