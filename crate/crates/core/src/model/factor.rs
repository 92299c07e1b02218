//! One-dimensional density factors and their closed-form convolutions with
//! the built-in noise laws. Product mixtures of these factors back every
//! built-in target, which keeps smoothing integrals and the observation
//! density exact.

use rand::distributions::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::util::{erfcx, norm_cdf};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor1D {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Laplace { loc: f64, scale: f64 },
}

/// Per-axis noise law. Built-in noises are products of these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisNoise {
    Dirac,
    Laplace { scale: f64 },
    Gaussian { sigma: f64 },
}

pub(crate) fn laplace_draw<R: Rng + ?Sized>(rng: &mut R, loc: f64, scale: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

impl Factor1D {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Factor1D::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Factor1D::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            Factor1D::Laplace { loc, scale } => loc.is_finite() && scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid factor parameters: {self:?}"))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Factor1D::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                INV_SQRT_2PI / sd * (-0.5 * z * z).exp()
            }
            Factor1D::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Factor1D::Laplace { loc, scale } => (-(x - loc).abs() / scale).exp() / (2.0 * scale),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Factor1D::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            Factor1D::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Factor1D::Laplace { loc, scale } => laplace_cdf(x - loc, scale),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Factor1D::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Factor1D::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            Factor1D::Laplace { loc, scale } => laplace_draw(rng, loc, scale),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Factor1D::Normal { mean, .. } => mean,
            Factor1D::Uniform { lo, hi } => 0.5 * (lo + hi),
            Factor1D::Laplace { loc, .. } => loc,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Factor1D::Normal { sd, .. } => sd * sd,
            Factor1D::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Factor1D::Laplace { scale, .. } => 2.0 * scale * scale,
        }
    }

    /// Points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Factor1D::Normal { .. } => Vec::new(),
            Factor1D::Uniform { lo, hi } => vec![lo, hi],
            Factor1D::Laplace { loc, .. } => vec![loc],
        }
    }

    /// Interval holding all but a negligible (< 1e-15) fraction of the mass.
    pub fn effective_range(&self) -> (f64, f64) {
        match *self {
            Factor1D::Normal { mean, sd } => (mean - 9.0 * sd, mean + 9.0 * sd),
            Factor1D::Uniform { lo, hi } => (lo, hi),
            Factor1D::Laplace { loc, scale } => (loc - 36.0 * scale, loc + 36.0 * scale),
        }
    }

    /// Density of `X + Y` at `x` with `X` from this factor and `Y` from `noise`.
    pub fn convolved_pdf(&self, noise: AxisNoise, x: f64) -> f64 {
        match (*self, noise) {
            (_, AxisNoise::Dirac) => self.pdf(x),
            (Factor1D::Normal { mean, sd }, AxisNoise::Gaussian { sigma }) => {
                Factor1D::Normal { mean, sd: sd.hypot(sigma) }.pdf(x)
            }
            (Factor1D::Normal { mean, sd }, AxisNoise::Laplace { scale }) => {
                normal_laplace(x - mean, sd, scale)
            }
            (Factor1D::Laplace { loc, scale }, AxisNoise::Gaussian { sigma }) => {
                normal_laplace(x - loc, sigma, scale)
            }
            (Factor1D::Laplace { loc, scale: b1 }, AxisNoise::Laplace { scale: b2 }) => {
                laplace_laplace(x - loc, b1, b2)
            }
            (Factor1D::Uniform { lo, hi }, AxisNoise::Laplace { scale }) => {
                (laplace_cdf(x - lo, scale) - laplace_cdf(x - hi, scale)) / (hi - lo)
            }
            (Factor1D::Uniform { lo, hi }, AxisNoise::Gaussian { sigma }) => {
                (norm_cdf((x - lo) / sigma) - norm_cdf((x - hi) / sigma)) / (hi - lo)
            }
        }
    }
}

impl AxisNoise {
    pub fn char_fn(&self, t: f64) -> f64 {
        match *self {
            AxisNoise::Dirac => 1.0,
            AxisNoise::Laplace { scale } => 1.0 / (1.0 + scale * scale * t * t),
            AxisNoise::Gaussian { sigma } => (-0.5 * sigma * sigma * t * t).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AxisNoise::Dirac => 0.0,
            AxisNoise::Laplace { scale } => laplace_draw(rng, 0.0, scale),
            AxisNoise::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            AxisNoise::Dirac => 0.0,
            AxisNoise::Laplace { scale } => std::f64::consts::SQRT_2 * scale,
            AxisNoise::Gaussian { sigma } => sigma,
        }
    }
}

fn laplace_cdf(u: f64, scale: f64) -> f64 {
    if u < 0.0 {
        0.5 * (u / scale).exp()
    } else {
        1.0 - 0.5 * (-u / scale).exp()
    }
}

/// Density of N(0, s²) ⋆ Laplace(0, b) at z, written with erfcx so that
/// neither the exponential nor the erfc factor overflows in the tails.
fn normal_laplace(z: f64, s: f64, b: f64) -> f64 {
    let half = |z: f64| {
        let y = (s / b - z / s) / std::f64::consts::SQRT_2;
        if y >= 0.0 {
            (-0.5 * z * z / (s * s)).exp() * erfcx(y)
        } else {
            (0.5 * s * s / (b * b) - z / b).exp() * erfc(y)
        }
    };
    (half(z) + half(-z)) / (4.0 * b)
}

fn laplace_laplace(z: f64, b1: f64, b2: f64) -> f64 {
    let a = z.abs();
    if (b1 - b2).abs() <= 1e-6 * b1.max(b2) {
        let b = 0.5 * (b1 + b2);
        (b + a) * (-a / b).exp() / (4.0 * b * b)
    } else {
        (b1 * (-a / b1).exp() - b2 * (-a / b2).exp()) / (2.0 * (b1 * b1 - b2 * b2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre_split;

    fn brute_convolution(f: Factor1D, g: impl Fn(f64) -> f64, x: f64) -> f64 {
        let (lo, hi) = f.effective_range();
        let mut br = f.breakpoints();
        br.push(x);
        br.sort_by(f64::total_cmp);
        gauss_legendre_split(&|t| f.pdf(t) * g(x - t), lo, hi, &br, 64)
    }

    #[test]
    fn convolutions_match_brute_force() {
        let factors = [
            Factor1D::Normal { mean: 0.3, sd: 0.7 },
            Factor1D::Uniform { lo: -1.0, hi: 0.5 },
            Factor1D::Laplace { loc: 0.2, scale: 0.6 },
        ];
        let laplace = |b: f64| move |y: f64| (-y.abs() / b).exp() / (2.0 * b);
        let gauss = |s: f64| move |y: f64| INV_SQRT_2PI / s * (-0.5 * y * y / (s * s)).exp();
        for f in factors {
            for x in [-3.0, -0.4, 0.0, 0.9, 4.0] {
                let lap = brute_convolution(f, laplace(1.0), x);
                let got = f.convolved_pdf(AxisNoise::Laplace { scale: 1.0 }, x);
                assert!((lap - got).abs() < 1e-9, "{f:?} laplace x={x}: {lap} vs {got}");
                let gau = brute_convolution(f, gauss(0.5), x);
                let got = f.convolved_pdf(AxisNoise::Gaussian { sigma: 0.5 }, x);
                assert!((gau - got).abs() < 1e-9, "{f:?} gauss x={x}: {gau} vs {got}");
            }
        }
    }

    #[test]
    fn equal_scale_laplace_convolution() {
        let f = Factor1D::Laplace { loc: 0.0, scale: 1.0 };
        let g = |y: f64| (-y.abs()).exp() / 2.0;
        for x in [0.0, 0.5, 3.0] {
            let brute = brute_convolution(f, g, x);
            assert!((brute - f.convolved_pdf(AxisNoise::Laplace { scale: 1.0 }, x)).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_laplace_tails_are_finite() {
        for z in [-80.0, -30.0, 30.0, 80.0] {
            let v = normal_laplace(z, 0.3, 1.0);
            assert!(v.is_finite() && v >= 0.0);
        }
    }
}
