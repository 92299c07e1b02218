//! Quadrature helpers: piecewise Gauss–Legendre on fixed panels and
//! double-exponential integration over half-lines split at known zeros.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
        gl.into_node_weight_pairs().into_vec()
    })
}

/// Integrates `f` over `[a, b]` with `sub` equal panels of 24-point Gauss–Legendre.
pub(crate) fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, sub: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = (b - a) / sub as f64;
    let mut total = 0.0;
    for s in 0..sub {
        let lo = a + s as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut acc = 0.0;
        for &(x, w) in rule() {
            acc += w * f(mid + half * x);
        }
        total += half * acc;
    }
    total
}

/// Integrates `f` over `[a, b]`, splitting at the sorted `breaks` that fall inside.
pub(crate) fn gauss_legendre_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    sub: usize,
) -> f64 {
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.windows(2).map(|w| gauss_legendre(f, w[0], w[1], sub)).sum()
}

/// Adaptive double-exponential integration over consecutive panels.
/// Returns the integral and the summed error estimate.
pub(crate) fn integrate_panels<F: Fn(f64) -> f64>(f: &F, edges: &[f64], tol: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut err = 0.0;
    for w in edges.windows(2) {
        let out = quadrature::double_exponential::integrate(f, w[0], w[1], tol);
        total += out.integral;
        err += out.error_estimate;
    }
    (total, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_gaussian() {
        let f = |x: f64| (-0.5 * x * x).exp();
        let v = gauss_legendre(&f, -12.0, 12.0, 16);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn split_handles_kinks() {
        let f = |x: f64| x.abs();
        let v = gauss_legendre_split(&f, -1.0, 2.0, &[0.0], 1);
        assert!((v - 2.5).abs() < 1e-14);
    }
}
