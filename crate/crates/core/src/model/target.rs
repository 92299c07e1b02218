use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::factor::Factor1D;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre_split;

pub type TargetPdf = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type TargetSampler = Arc<dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync>;

/// One product component `w · ∏_j φ_j(x_j)` of a mixture target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub factors: Vec<Factor1D>,
}

#[derive(Clone)]
pub enum TargetKind {
    /// Mixture of product densities; covers Gaussian mixtures, uniform boxes
    /// and Laplace products.
    ProductMixture(Vec<MixtureComponent>),
    Custom {
        pdf: TargetPdf,
        sampler: Option<TargetSampler>,
        support: Vec<(f64, f64)>,
    },
}

impl fmt::Debug for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::ProductMixture(c) => f.debug_tuple("ProductMixture").field(c).finish(),
            TargetKind::Custom { support, sampler, .. } => f
                .debug_struct("Custom")
                .field("support", support)
                .field("sampler", &sampler.is_some())
                .finish(),
        }
    }
}

/// The density `f` to be recovered, with optional nominal smoothness for benchmarking.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    kind: TargetKind,
    dim: usize,
    pub beta: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
}

impl TargetSpec {
    pub fn product_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.factors.len())
            .ok_or_else(|| Error::InvalidInput("mixture needs at least one component".into()))?;
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let mut total = 0.0;
        for c in &components {
            if c.factors.len() != dim {
                return Err(Error::InvalidInput("mixture components disagree on dimension".into()));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidInput(format!("component weight {} must be > 0", c.weight)));
            }
            for f in &c.factors {
                f.validate().map_err(Error::InvalidInput)?;
                let (lo, hi) = f.effective_range();
                let mass = gauss_legendre_split(&|x| f.pdf(x), lo, hi, &f.breakpoints(), 64);
                if (mass - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidInput(format!("factor {f:?} integrates to {mass}")));
                }
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(TargetSpec { kind: TargetKind::ProductMixture(components), dim, beta: None, radii: None })
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self::gaussian_mixture(vec![(1.0, vec![0.0; dim], vec![1.0; dim])]).expect("valid normal")
    }

    /// Mixture of diagonal Gaussians given as `(weight, means, sds)`.
    pub fn gaussian_mixture(components: Vec<(f64, Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let comps = components
            .into_iter()
            .map(|(weight, mean, sd)| {
                if mean.len() != sd.len() {
                    return Err(Error::InvalidInput("mean and sd lengths differ".into()));
                }
                let factors = mean
                    .iter()
                    .zip(&sd)
                    .map(|(&m, &s)| Factor1D::Normal { mean: m, sd: s })
                    .collect();
                Ok(MixtureComponent { weight, factors })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::product_mixture(comps)
    }

    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidInput("box bounds have different lengths".into()));
        }
        let factors = lo.iter().zip(&hi).map(|(&lo, &hi)| Factor1D::Uniform { lo, hi }).collect();
        Self::product_mixture(vec![MixtureComponent { weight: 1.0, factors }])
    }

    pub fn laplace_product(scales: Vec<f64>) -> Result<Self> {
        let factors = scales.iter().map(|&scale| Factor1D::Laplace { loc: 0.0, scale }).collect();
        Self::product_mixture(vec![MixtureComponent { weight: 1.0, factors }])
    }

    pub fn custom(
        dim: usize,
        pdf: TargetPdf,
        sampler: Option<TargetSampler>,
        support: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if dim == 0 || support.len() != dim {
            return Err(Error::InvalidInput("custom target needs one support interval per axis".into()));
        }
        Ok(TargetSpec { kind: TargetKind::Custom { pdf, sampler, support }, dim, beta: None, radii: None })
    }

    pub fn with_smoothness(mut self, beta: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if beta.len() != self.dim || radii.len() != self.dim {
            return Err(Error::InvalidInput("smoothness vectors must have length d".into()));
        }
        if beta.iter().chain(&radii).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("smoothness parameters must be positive".into()));
        }
        self.beta = Some(beta);
        self.radii = Some(radii);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn components(&self) -> Option<&[MixtureComponent]> {
        match &self.kind {
            TargetKind::ProductMixture(c) => Some(c),
            TargetKind::Custom { .. } => None,
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TargetKind::ProductMixture(comps) => comps
                .iter()
                .map(|c| c.weight * c.factors.iter().zip(x).map(|(f, &xj)| f.pdf(xj)).product::<f64>())
                .sum(),
            TargetKind::Custom { pdf, .. } => pdf(x),
        }
    }

    pub fn has_sampler(&self) -> bool {
        match &self.kind {
            TargetKind::ProductMixture(_) => true,
            TargetKind::Custom { sampler, .. } => sampler.is_some(),
        }
    }

    /// Draws one point from `f` into `out`.
    pub fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            TargetKind::ProductMixture(comps) => {
                let comp = if comps.len() == 1 {
                    &comps[0]
                } else {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut chosen = comps.last().expect("non-empty");
                    for c in comps {
                        acc += c.weight;
                        if u < acc {
                            chosen = c;
                            break;
                        }
                    }
                    chosen
                };
                for (o, f) in out.iter_mut().zip(&comp.factors) {
                    *o = f.sample(rng);
                }
                Ok(())
            }
            TargetKind::Custom { sampler, .. } => {
                let s = sampler.as_ref().ok_or(Error::MissingSampler("custom target"))?;
                s(rng, out);
                Ok(())
            }
        }
    }

    /// Per-axis interval carrying essentially all of the mass.
    pub fn effective_support(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            TargetKind::ProductMixture(comps) => (0..self.dim)
                .map(|j| {
                    comps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                        let (a, b) = c.factors[j].effective_range();
                        (lo.min(a), hi.max(b))
                    })
                })
                .collect(),
            TargetKind::Custom { support, .. } => support.clone(),
        }
    }

    /// Mean of coordinate `j` (product mixtures only).
    pub fn axis_mean(&self, j: usize) -> Option<f64> {
        self.components().map(|c| c.iter().map(|c| c.weight * c.factors[j].mean()).sum())
    }

    /// Variance of coordinate `j` (product mixtures only).
    pub fn axis_variance(&self, j: usize) -> Option<f64> {
        let comps = self.components()?;
        let mean = self.axis_mean(j)?;
        Some(
            comps
                .iter()
                .map(|c| {
                    let f = &c.factors[j];
                    c.weight * (f.variance() + (f.mean() - mean).powi(2))
                })
                .sum(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights() {
        let bad = TargetSpec::gaussian_mixture(vec![(0.5, vec![0.0], vec![1.0])]);
        assert!(bad.is_err());
        let bad = TargetSpec::uniform_box(vec![1.0], vec![0.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn mixture_moments() {
        let t = TargetSpec::gaussian_mixture(vec![
            (0.5, vec![-1.0], vec![0.5]),
            (0.5, vec![1.0], vec![0.5]),
        ])
        .unwrap();
        assert!(t.axis_mean(0).unwrap().abs() < 1e-15);
        assert!((t.axis_variance(0).unwrap() - 1.25).abs() < 1e-12);
    }
}
