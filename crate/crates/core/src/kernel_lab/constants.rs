use serde::Serialize;

use super::kernel::KernelSpec;
use crate::error::{Error, Result};
use crate::model::NoiseModel;

/// Fourier-side constants of the kernel, combined with the certified noise margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConstants {
    /// `∫|Ǩ(t)| ∏(1 + t_j²)^{γ_j/2} dt`.
    pub k1: f64,
    /// Square root of `∫|Ǩ(t)|² ∏(1 + t_j²)^{γ_j} dt`.
    pub k2: f64,
    /// `‖Ǩ‖₁`.
    pub k_l1: f64,
    /// `‖Ǩ‖₂`.
    pub k_l2: f64,
    pub m_inf: f64,
    pub m_2: f64,
    pub gamma: Vec<f64>,
    /// Risk index, carried along for the threshold `λ_n`.
    pub p: f64,
    /// The certified `ε` (`α < 1`) or `Υ₀` (`α = 1`).
    pub margin: f64,
}

/// Computes `k₁, k₂, M_∞, M₂` for a certified model.
///
/// `M₂` uses the Plancherel factor `(2π)^{-d/2}`, which makes
/// `‖M(·,h)‖₂ ≤ M₂ ∏h_j^{-1/2}(h_j∧1)^{-γ_j}` an actual bound.
pub fn kernel_constants(kernel: &KernelSpec, model: &NoiseModel, p: f64) -> Result<KernelConstants> {
    if kernel.dim != model.dim() {
        return Err(Error::InvalidInput(format!(
            "kernel dimension {} differs from model dimension {}",
            kernel.dim,
            model.dim()
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("p must be a finite number >= 1, got {p}")));
    }
    let margin = model.margin().ok_or(Error::NotCertified)?;
    let gamma = model.gamma();
    let base = kernel.base;
    let d = kernel.dim as i32;

    let mut k1 = 1.0;
    let mut k2_sq = 1.0;
    for &g in &gamma {
        k1 *= base.weighted_fourier_integral(1, 0.5 * g)?;
        k2_sq *= base.weighted_fourier_integral(2, g)?;
    }
    let l1_axis = base.weighted_fourier_integral(1, 0.0);
    let l2_axis = base.weighted_fourier_integral(2, 0.0)?;
    let k_l2 = l2_axis.powi(d).sqrt();
    let k2 = k2_sq.sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;

    let (k_l1, m_inf, m_2) = if model.is_pure_convolution() {
        // ‖Ǩ‖₁ is reported when finite; for α = 1 only k₁ enters M_∞.
        let k_l1 = l1_axis.map(|v| v.powi(d)).unwrap_or(f64::INFINITY);
        (k_l1, (two_pi.powi(-d) * k1 / margin).max(1.0), (two_pi.powf(-0.5 * d as f64) * k2 / margin).max(1.0))
    } else {
        let k_l1 = l1_axis?.powi(d);
        (k_l1, (two_pi.powi(-d) * k_l1 / margin).max(1.0), (two_pi.powf(-0.5 * d as f64) * k_l2 / margin).max(1.0))
    };
    Ok(KernelConstants { k1, k2, k_l1, k_l2, m_inf, m_2, gamma, p, margin })
}

impl KernelConstants {
    /// `∏ h_j (h_j ∧ 1)^{γ_j}`, the denominator of the sup-norm bound.
    pub fn scale_factor(&self, h: &[f64]) -> f64 {
        h.iter().zip(&self.gamma).map(|(&hj, &g)| hj * hj.min(1.0).powf(g)).product()
    }

    /// Bound on `sup|M(·,h)|`.
    pub fn sup_bound(&self, h: &[f64]) -> f64 {
        self.m_inf / self.scale_factor(h)
    }

    /// Bound on `‖M(·,h)‖₂`.
    pub fn l2_bound(&self, h: &[f64]) -> f64 {
        let s: f64 = h.iter().zip(&self.gamma).map(|(&hj, &g)| hj.sqrt() * hj.min(1.0).powf(g)).product();
        self.m_2 / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_lab::BaseKernel;
    use crate::model::{FrequencyProbe, NoiseKind};

    fn certified(alpha: f64, kind: NoiseKind, d: usize) -> NoiseModel {
        let mut m = NoiseModel::new(alpha, kind, d).unwrap();
        m.certify(&FrequencyProbe::for_band(200.0, d)).unwrap();
        m
    }

    #[test]
    fn requires_certification() {
        let m = NoiseModel::new(0.5, NoiseKind::Laplace { scale: 1.0 }, 1).unwrap();
        let k = KernelSpec::new(BaseKernel::default(), 1);
        assert!(matches!(kernel_constants(&k, &m, 2.0), Err(Error::NotCertified)));
    }

    #[test]
    fn direct_case_collapses_weights() {
        let m = certified(0.0, NoiseKind::None, 1);
        let k = KernelSpec::new(BaseKernel::default(), 1);
        let c = kernel_constants(&k, &m, 2.0).unwrap();
        assert_eq!(c.gamma, vec![0.0]);
        assert!((c.k1 - c.k_l1).abs() < 1e-14);
        assert!((c.k2 - c.k_l2).abs() < 1e-14);
        assert_eq!(c.m_inf, (c.k_l1 / (2.0 * std::f64::consts::PI)).max(1.0));
        assert!(c.m_inf >= 1.0 && c.m_2 >= 1.0);
    }

    #[test]
    fn pure_laplace_k1_by_two_quadratures() {
        let m = certified(1.0, NoiseKind::Laplace { scale: 1.0 }, 1);
        let base = BaseKernel::BSpline { order: 8 };
        let c = kernel_constants(&KernelSpec::new(base, 1), &m, 2.0).unwrap();
        // Composite Simpson on a fixed fine grid; the tail beyond 400 is below 1e-10.
        let (t_max, steps) = (400.0, 400_000);
        let dt = t_max / steps as f64;
        let f = |t: f64| base.fourier(t).abs() * (1.0 + t * t);
        let mut s = f(0.0) + f(t_max);
        for i in 1..steps {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dt);
        }
        let simpson = 2.0 * s * dt / 3.0;
        assert!((c.k1 - simpson).abs() < 1e-6 * simpson, "{} vs {simpson}", c.k1);
        assert_eq!(c.gamma, vec![2.0]);
    }

    #[test]
    fn rough_kernel_diverges_under_deconvolution() {
        let m = certified(1.0, NoiseKind::Laplace { scale: 1.0 }, 1);
        let k = KernelSpec::new(BaseKernel::Epanechnikov, 1);
        assert!(matches!(kernel_constants(&k, &m, 2.0), Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn product_constants_scale_with_dimension() {
        let k1d = kernel_constants(&KernelSpec::new(BaseKernel::default(), 1), &certified(0.0, NoiseKind::None, 1), 2.0).unwrap();
        let k2d = kernel_constants(&KernelSpec::new(BaseKernel::default(), 2), &certified(0.0, NoiseKind::None, 2), 2.0).unwrap();
        assert!((k2d.k_l1 - k1d.k_l1.powi(2)).abs() < 1e-10);
        assert!((k2d.k_l2 - k1d.k_l2.powi(2)).abs() < 1e-10);
    }
}
