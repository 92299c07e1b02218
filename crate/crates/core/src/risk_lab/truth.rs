//! Quadrature oracles computed from the known target and noise laws.

use crate::error::{Error, Result};
use crate::kernel_lab::{DeconvKernelTable, KernelSpec, Synthesis};
use crate::model::{MixtureComponent, NoiseModel, TargetSpec};
use crate::quad::{gauss_legendre, gauss_legendre_split};

fn components(target: &TargetSpec) -> Result<&[MixtureComponent]> {
    target
        .components()
        .ok_or_else(|| Error::Unsupported("quadrature oracles need a product-mixture target".into()))
}

/// `S_h(x, f) = ∫ K_h(t − x) f(t) dt`.
pub fn smoothed_truth(target: &TargetSpec, kernel: &KernelSpec, h: &[f64], x: &[f64]) -> Result<f64> {
    let c = kernel.support_radius();
    let knots = kernel.base.knots();
    let mut total = 0.0;
    for comp in components(target)? {
        let mut prod = comp.weight;
        for (j, factor) in comp.factors.iter().enumerate() {
            let mut breaks = knots.clone();
            breaks.extend(factor.breakpoints().iter().map(|b| (b - x[j]) / h[j]));
            let integrand = |u: f64| kernel.base.value(u) * factor.pdf(x[j] + h[j] * u);
            prod *= gauss_legendre_split(&integrand, -c, c, &breaks, 2);
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
    }
    Ok(total)
}

/// The observation density `𝔭 = (1 − α)f + α(f ⋆ g)`.
pub fn observation_density(target: &TargetSpec, model: &NoiseModel, x: &[f64]) -> Result<f64> {
    let axis = model
        .axis_noise()
        .ok_or_else(|| Error::Unsupported("observation density needs a built-in noise law".into()))?;
    let alpha = model.alpha();
    let mut total = 0.0;
    for comp in components(target)? {
        let direct: f64 = if alpha < 1.0 { comp.factors.iter().zip(x).map(|(f, &v)| f.pdf(v)).product() } else { 0.0 };
        let noisy: f64 = if alpha > 0.0 {
            comp.factors.iter().zip(x).map(|(f, &v)| f.convolved_pdf(axis, v)).product()
        } else {
            0.0
        };
        total += comp.weight * ((1.0 - alpha) * direct + alpha * noisy);
    }
    Ok(total)
}

/// Marginal density of coordinate `j` under `𝔭`.
pub fn observation_marginal(target: &TargetSpec, model: &NoiseModel, j: usize, v: f64) -> Result<f64> {
    let axis = model
        .axis_noise()
        .ok_or_else(|| Error::Unsupported("observation density needs a built-in noise law".into()))?;
    let alpha = model.alpha();
    Ok(components(target)?
        .iter()
        .map(|c| {
            let f = &c.factors[j];
            c.weight * ((1.0 - alpha) * f.pdf(v) + alpha * f.convolved_pdf(axis, v))
        })
        .sum())
}

/// Per-axis interval carrying the mass of `𝔭`: the target support padded by
/// six noise standard deviations.
pub fn observation_support(target: &TargetSpec, model: &NoiseModel) -> Vec<(f64, f64)> {
    let pad = if model.alpha() > 0.0 { 6.0 * model.noise_sd().unwrap_or(0.0) } else { 0.0 };
    target.effective_support().into_iter().map(|(a, b)| (a - pad, b + pad)).collect()
}

/// Quantile `q` of the marginal of `𝔭` along axis `j`.
pub fn observation_quantile(target: &TargetSpec, model: &NoiseModel, j: usize, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level must lie in [0, 1], got {q}")));
    }
    let (lo, hi) = observation_support(target, model)[j];
    let steps = 20_000;
    let dx = (hi - lo) / steps as f64;
    let mut cdf = vec![0.0; steps + 1];
    let mut prev = observation_marginal(target, model, j, lo)?;
    for i in 1..=steps {
        let cur = observation_marginal(target, model, j, lo + i as f64 * dx)?;
        cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) * dx;
        prev = cur;
    }
    let total = cdf[steps];
    let level = q * total;
    let i = cdf.partition_point(|&c| c < level).clamp(1, steps);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let frac = if c1 > c0 { (level - c0) / (c1 - c0) } else { 0.0 };
    Ok(lo + (i as f64 - 1.0 + frac) * dx)
}

/// `σ²(x,h) = ∫ M²(t − x, h) 𝔭(t) dt`, using the same tabulated `M` as the
/// estimator. One-dimensional tables integrate exactly between nodes;
/// higher dimensions use the node sum.
pub fn true_sigma2(target: &TargetSpec, model: &NoiseModel, table: &DeconvKernelTable, x: &[f64]) -> Result<f64> {
    let d = table.dim();
    if d == 1 {
        let (lo, hi) = table.reach(0);
        let f = |y: f64| table.eval(&[y]).powi(2) * observation_density(target, model, &[x[0] + y]).unwrap_or(0.0);
        observation_density(target, model, x)?;
        if table.synthesis() == Synthesis::Analytic {
            let knots: Vec<f64> = table.kernel().base.knots().iter().map(|k| k * table.h()[0]).collect();
            return Ok(gauss_legendre_split(&f, lo, hi, &knots, 2));
        }
        // Between nodes M² is smooth (interpolation is linear), so a
        // three-point rule per cell is enough.
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let step = table.step()[0];
        let cells = ((hi - lo) / step).round() as usize;
        let mut total = 0.0;
        for c in 0..cells {
            let a = lo + c as f64 * step;
            let mid = a + 0.5 * step;
            let mut cell = 0.0;
            for (u, w) in nodes.iter().zip(&weights) {
                cell += w * f(mid + 0.5 * step * u);
            }
            total += 0.5 * step * cell;
        }
        return Ok(total);
    }
    let cell: f64 = table.step().iter().product();
    let values = table.values();
    let mut total = 0.0;
    let mut t = vec![0.0; d];
    for (flat, v) in values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let y = table.node(flat);
        for j in 0..d {
            t[j] = x[j] + y[j];
        }
        total += v * v * observation_density(target, model, &t)?;
    }
    Ok(total * cell)
}

/// `∫ M(t − x, h) 𝔭(t) dt`, which equals `S_h(x, f)` by the structural identity.
pub fn expected_estimate(target: &TargetSpec, model: &NoiseModel, table: &DeconvKernelTable, x: &[f64]) -> Result<f64> {
    if table.dim() != 1 {
        return Err(Error::Unsupported("expected_estimate is one-dimensional".into()));
    }
    let (lo, hi) = table.reach(0);
    let f = |y: f64| table.eval(&[y]) * observation_density(target, model, &[x[0] + y]).unwrap_or(0.0);
    observation_density(target, model, x)?;
    let panels = ((hi - lo) / table.step()[0]).round().max(1.0) as usize;
    Ok(gauss_legendre(&f, lo, hi, panels.min(4096)))
}
