use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::integrate_panels;

const MAX_SPLINE_ORDER: u32 = 12;
/// Panel count after which the oscillating Fourier tail is replaced by its
/// averaged power-law asymptote.
const MAX_PANELS: usize = 3000;

/// One-dimensional base kernel `𝒦` supported on `[-1, 1]`, with `∫𝒦 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKernel {
    /// `1/2` on `[-1, 1]`. Its transform is not integrable, so it is only
    /// usable on the direct (`α = 0`) path.
    Uniform,
    /// `(3/4)(1 - u²)` on `[-1, 1]`.
    Epanechnikov,
    /// Cardinal B-spline of the given order rescaled to `[-1, 1]`; it is
    /// `C^{order-2}` and its transform is `sinc(t/order)^order`.
    BSpline { order: u32 },
}

impl Default for BaseKernel {
    fn default() -> Self {
        BaseKernel::BSpline { order: 8 }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `r`-th derivative of the centred unit-knot cardinal B-spline of order `m`.
/// Evaluated on the left half, where the truncated-power sum has the fewest
/// terms, and mirrored.
fn cardinal_bspline(m: u32, x: f64, r: u32) -> f64 {
    let half = 0.5 * m as f64;
    if x.abs() >= half {
        return 0.0;
    }
    let sign = if x > 0.0 && r % 2 == 1 { -1.0 } else { 1.0 };
    let xl = -x.abs();
    let deg = m - 1 - r;
    let mut acc = 0.0;
    for k in 0..=m {
        let u = xl + half - k as f64;
        if u <= 0.0 {
            break;
        }
        let term = binomial(m, k) * if deg == 0 { 1.0 } else { u.powi(deg as i32) };
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    sign * acc / factorial(deg)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `E|sin U|^a` for `U` uniform over a period.
fn mean_abs_trig_power(a: f64) -> f64 {
    gamma(0.5 * (a + 1.0)) / (std::f64::consts::PI.sqrt() * gamma(0.5 * a + 1.0))
}

impl BaseKernel {
    pub fn catalogue() -> Vec<String> {
        let mut names = vec!["uniform".to_string(), "epanechnikov".to_string()];
        names.extend((2..=MAX_SPLINE_ORDER).map(|m| format!("bspline{m}")));
        names
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownKernel {
            name: name.to_string(),
            available: Self::catalogue().join(", "),
        };
        match name {
            "uniform" => Ok(BaseKernel::Uniform),
            "epanechnikov" => Ok(BaseKernel::Epanechnikov),
            other => {
                let order: u32 = other
                    .strip_prefix("bspline")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(unknown)?;
                if (2..=MAX_SPLINE_ORDER).contains(&order) {
                    Ok(BaseKernel::BSpline { order })
                } else {
                    Err(unknown())
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            BaseKernel::Uniform => "uniform".into(),
            BaseKernel::Epanechnikov => "epanechnikov".into(),
            BaseKernel::BSpline { order } => format!("bspline{order}"),
        }
    }

    /// `c_𝒦`: every built-in kernel vanishes outside `[-1, 1]`.
    pub fn support_radius(&self) -> f64 {
        1.0
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            BaseKernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            BaseKernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            BaseKernel::BSpline { order } => {
                let s = 0.5 * order as f64;
                s * cardinal_bspline(order, s * u, 0)
            }
        }
    }

    /// `r`-th derivative where it exists as a piecewise closed form.
    pub fn derivative(&self, u: f64, r: u32) -> Option<f64> {
        if r == 0 {
            return Some(self.value(u));
        }
        match *self {
            BaseKernel::Uniform => None,
            BaseKernel::Epanechnikov => {
                let inside = u.abs() <= 1.0;
                match r {
                    1 => Some(if inside { -1.5 * u } else { 0.0 }),
                    2 => Some(if inside { -1.5 } else { 0.0 }),
                    _ => None,
                }
            }
            BaseKernel::BSpline { order } => {
                if r >= order {
                    return None;
                }
                let s = 0.5 * order as f64;
                Some(s.powi(r as i32 + 1) * cardinal_bspline(order, s * u, r))
            }
        }
    }

    /// Number of continuous derivatives.
    pub fn smoothness(&self) -> u32 {
        match *self {
            BaseKernel::Uniform => 0,
            BaseKernel::Epanechnikov => 0,
            BaseKernel::BSpline { order } => order.saturating_sub(2),
        }
    }

    /// Interior points where the kernel is not analytic.
    pub fn knots(&self) -> Vec<f64> {
        match *self {
            BaseKernel::Uniform | BaseKernel::Epanechnikov => vec![-1.0, 1.0],
            BaseKernel::BSpline { order } => (0..=order).map(|k| -1.0 + 2.0 * k as f64 / order as f64).collect(),
        }
    }

    /// Closed-form `Ǩ₁(t) = ∫𝒦(u) e^{-iut} du` (real: all kernels are even).
    pub fn fourier(&self, t: f64) -> f64 {
        match *self {
            BaseKernel::Uniform => sinc(t),
            BaseKernel::Epanechnikov => {
                if t.abs() < 1e-2 {
                    let t2 = t * t;
                    1.0 - t2 / 10.0 + t2 * t2 / 280.0
                } else {
                    3.0 * (t.sin() - t * t.cos()) / (t * t * t)
                }
            }
            BaseKernel::BSpline { order } => sinc(t / order as f64).powi(order as i32),
        }
    }

    /// Largest value of `max|𝒦|`.
    pub fn true_sup(&self) -> f64 {
        match *self {
            BaseKernel::Uniform => 0.5,
            BaseKernel::Epanechnikov => 0.75,
            BaseKernel::BSpline { .. } => self.value(0.0),
        }
    }

    /// `‖𝒦‖_∞` under the `≥ 1` normalisation.
    pub fn sup_norm(&self) -> f64 {
        self.true_sup().max(1.0)
    }

    /// Envelope `|Ǩ₁(t)| ≈ C·|t|^{-r}·osc(t)`: returns `(C, r, trig power)`.
    fn decay(&self) -> (f64, f64, f64) {
        match *self {
            BaseKernel::Uniform => (1.0, 1.0, 1.0),
            BaseKernel::Epanechnikov => (3.0, 2.0, 1.0),
            BaseKernel::BSpline { order } => {
                let m = order as f64;
                (m.powf(m), m, m)
            }
        }
    }

    /// Polynomial decay rate of `|Ǩ₁|`.
    pub fn decay_rate(&self) -> f64 {
        self.decay().1
    }

    /// Exclusive upper bound on an ill-posedness exponent `μ` for which
    /// `∫|Ǩ₁(t)|(1 + t²)^{μ/2} dt` converges.
    pub fn max_mu(&self) -> f64 {
        self.decay_rate() - 1.0
    }

    fn fourier_zeros(&self, t_max: f64) -> Vec<f64> {
        let mut edges = vec![0.0];
        match *self {
            BaseKernel::Uniform | BaseKernel::BSpline { .. } => {
                let period = match *self {
                    BaseKernel::BSpline { order } => order as f64 * std::f64::consts::PI,
                    _ => std::f64::consts::PI,
                };
                let mut k = 1.0;
                while k * period < t_max {
                    edges.push(k * period);
                    k += 1.0;
                }
            }
            BaseKernel::Epanechnikov => {
                // Roots of tan t = t.
                let mut k = 1.0;
                loop {
                    let mut t: f64 = (k + 0.5) * std::f64::consts::PI - 1.0 / ((k + 0.5) * std::f64::consts::PI);
                    for _ in 0..30 {
                        let f = t.sin() - t * t.cos();
                        let df = t * t.sin();
                        t -= f / df;
                    }
                    if t >= t_max {
                        break;
                    }
                    edges.push(t);
                    k += 1.0;
                }
            }
        }
        edges.push(t_max);
        edges
    }

    /// `∫_ℝ |Ǩ₁(t)|^q (1 + t²)^w dt`, split at the zeros of `Ǩ₁`, with the
    /// oscillating tail replaced by its averaged asymptote when the decay is slow.
    pub fn weighted_fourier_integral(&self, q: u32, w: f64) -> Result<f64> {
        let (c, r, osc) = self.decay();
        let q_f = q as f64;
        let excess = q_f * r - 2.0 * w - 1.0;
        if excess <= 0.0 {
            return Err(Error::DivergentIntegral(format!(
                "kernel {} has |Ǩ| ~ t^-{r}; ∫|Ǩ|^{q}(1+t²)^{w} diverges",
                self.name()
            )));
        }
        let tail_coef = c.powf(q_f) * mean_abs_trig_power(osc * q_f);
        // Tail below 1e-15 needs tail_coef·T^{-excess}/excess < 1e-15.
        let t_exact = (tail_coef / (excess * 1e-15)).powf(1.0 / excess).max(50.0);
        let period = match *self {
            BaseKernel::BSpline { order } => order as f64 * std::f64::consts::PI,
            _ => std::f64::consts::PI,
        };
        let t_cap = MAX_PANELS as f64 * period;
        let t_end = t_exact.min(t_cap);
        let mut edges = self.fourier_zeros(t_end);
        if t_end < t_exact {
            // End on a zero so that the averaged tail starts at a period boundary.
            edges.pop();
        }
        let t_last = *edges.last().expect("non-empty");
        let f = |t: f64| self.fourier(t).abs().powi(q as i32) * (1.0 + t * t).powf(w);
        let (body, err) = integrate_panels(&f, &edges, 1e-14);
        let tail = if t_end < t_exact {
            tail_coef * t_last.powf(-excess) / excess
        } else {
            0.0
        };
        let total = 2.0 * (body + tail);
        if !total.is_finite() || err > 1e-6 * total.abs().max(1.0) {
            return Err(Error::DivergentIntegral(format!(
                "quadrature for kernel {} did not converge (estimate {total}, error {err})",
                self.name()
            )));
        }
        Ok(total)
    }
}

/// The product kernel `K(x) = ∏ 𝒦(x_j)` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(base: BaseKernel, dim: usize) -> Self {
        KernelSpec { base, dim }
    }

    pub fn support_radius(&self) -> f64 {
        self.base.support_radius()
    }

    pub fn sup_norm(&self) -> f64 {
        self.base.sup_norm()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&u| self.base.value(u)).product()
    }

    /// `K_h(y) = V_h^{-1} K(y / h)`.
    pub fn scaled(&self, y: &[f64], h: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (&yj, &hj) in y.iter().zip(h) {
            if acc == 0.0 {
                break;
            }
            acc *= self.base.value(yj / hj) / hj;
        }
        acc
    }

    pub fn fourier(&self, t: &[f64]) -> f64 {
        t.iter().map(|&tj| self.base.fourier(tj)).product()
    }

    /// `‖Ǩ‖_∞`; equals `Ǩ(0) = 1` for the non-negative built-in kernels.
    pub fn fourier_sup(&self) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre_split;

    fn all_kernels() -> Vec<BaseKernel> {
        let mut v = vec![BaseKernel::Uniform, BaseKernel::Epanechnikov];
        v.extend((2..=MAX_SPLINE_ORDER).map(|order| BaseKernel::BSpline { order }));
        v
    }

    #[test]
    fn kernels_integrate_to_one_and_vanish_outside() {
        for k in all_kernels() {
            let mass = gauss_legendre_split(&|u| k.value(u), -1.0, 1.0, &k.knots(), 8);
            assert!((mass - 1.0).abs() < 1e-9, "{} mass {mass}", k.name());
            for u in [1.0001, 1.5, -1.2, 7.0] {
                assert_eq!(k.value(u), 0.0);
            }
            assert!(k.sup_norm() >= 1.0);
            assert!(k.support_radius() >= 1.0);
        }
    }

    #[test]
    fn fourier_matches_quadrature() {
        for k in all_kernels() {
            for t in [0.0, 0.3, 1.7, 5.0, 23.0] {
                let num = gauss_legendre_split(&|u| k.value(u) * (u * t).cos(), -1.0, 1.0, &k.knots(), 16);
                assert!((num - k.fourier(t)).abs() < 1e-12, "{} t={t}: {num} vs {}", k.name(), k.fourier(t));
            }
        }
    }

    #[test]
    fn spline_derivatives_match_finite_differences() {
        let k = BaseKernel::BSpline { order: 8 };
        let e = 1e-4;
        for u in [-0.83, -0.4, 0.0, 0.11, 0.62] {
            for r in 1..=3 {
                let fd = (k.derivative(u + e, r - 1).unwrap() - k.derivative(u - e, r - 1).unwrap()) / (2.0 * e);
                let exact = k.derivative(u, r).unwrap();
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "r={r} u={u}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn names_round_trip_and_unknown_rejected() {
        for name in BaseKernel::catalogue() {
            assert_eq!(BaseKernel::from_name(&name).unwrap().name(), name);
        }
        match BaseKernel::from_name("gaussian") {
            Err(Error::UnknownKernel { available, .. }) => assert!(available.contains("bspline8")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(BaseKernel::from_name("bspline99").is_err());
    }

    #[test]
    fn divergence_detected() {
        assert!(matches!(
            BaseKernel::Uniform.weighted_fourier_integral(1, 0.0),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(BaseKernel::Epanechnikov.weighted_fourier_integral(1, 0.5).is_err());
        assert!(BaseKernel::BSpline { order: 4 }.weighted_fourier_integral(1, 1.5).is_err());
        assert!(BaseKernel::BSpline { order: 4 }.weighted_fourier_integral(1, 1.0).is_ok());
    }

    #[test]
    fn plancherel_for_l2_integral() {
        // ∫|Ǩ₁|² = 2π ∫𝒦².
        for k in [BaseKernel::Epanechnikov, BaseKernel::BSpline { order: 3 }, BaseKernel::BSpline { order: 8 }] {
            let l2 = gauss_legendre_split(&|u| k.value(u).powi(2), -1.0, 1.0, &k.knots(), 8);
            let f = k.weighted_fourier_integral(2, 0.0).unwrap();
            assert!((f - 2.0 * std::f64::consts::PI * l2).abs() < 1e-8 * f, "{}: {f}", k.name());
        }
    }
}
