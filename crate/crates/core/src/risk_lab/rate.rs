use serde::{Deserialize, Serialize};

use crate::bandwidth_grid::GridMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `2 + 1/β(α) > p`.
    Sparse,
    /// `2 + 1/β(α) = p`.
    Boundary,
    /// `2 + 1/β(α) < p`.
    Dense,
}

/// Hölder-type smoothness description together with the derived rate quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub beta: Vec<f64>,
    pub radii: Vec<f64>,
    pub alpha: f64,
    pub mu: Vec<f64>,
    pub p: f64,
    pub mode: GridMode,
    pub beta_alpha: f64,
    pub l_alpha: f64,
    pub regime: Regime,
}

/// Relative tolerance used to recognise the boundary regime.
const BOUNDARY_REL_TOL: f64 = 1e-12;

impl RateSpec {
    pub fn new(beta: Vec<f64>, radii: Vec<f64>, alpha: f64, mu: Vec<f64>, p: f64, mode: GridMode) -> Result<Self> {
        let d = beta.len();
        if d == 0 || radii.len() != d || mu.len() != d {
            return Err(Error::InvalidInput("beta, radii and mu must be non-empty and of equal length".into()));
        }
        if beta.iter().chain(&radii).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("beta and radii must be positive".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if mu.iter().any(|m| !(*m >= 0.0)) || (alpha == 1.0 && mu.iter().any(|m| *m == 0.0)) {
            return Err(Error::InvalidInput("mu must be non-negative, and positive when alpha = 1".into()));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("p must be >= 1, got {p}")));
        }
        let gamma: Vec<f64> = mu.iter().map(|&m| if alpha == 1.0 { m } else { 0.0 }).collect();
        let inv: f64 = beta.iter().zip(&gamma).map(|(b, g)| (2.0 * g + 1.0) / b).sum();
        let l_alpha = radii.iter().zip(&beta).zip(&gamma).map(|((l, b), g)| l.powf((2.0 * g + 1.0) / b)).product();
        let lhs = 2.0 + inv;
        let regime = if (lhs - p).abs() <= BOUNDARY_REL_TOL * p {
            Regime::Boundary
        } else if lhs > p {
            Regime::Sparse
        } else {
            Regime::Dense
        };
        Ok(RateSpec { beta, radii, alpha, mu, p, mode, beta_alpha: 1.0 / inv, l_alpha, regime })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// `t(ℍ)`: `d − 1` on the full grid, `0` on the isotropic one.
    pub fn t_grid(&self) -> f64 {
        match self.mode {
            GridMode::Full => (self.dim() - 1) as f64,
            GridMode::Isotropic => 0.0,
        }
    }

    /// `δ_n = L(α) ln(n) / n`.
    pub fn delta_n(&self, n: usize) -> f64 {
        let n = n as f64;
        self.l_alpha * n.ln() / n
    }

    /// `φ_n = δ_n^{1/(2 + 1/β(α))}`.
    pub fn phi_n(&self, n: usize) -> f64 {
        self.delta_n(n).powf(1.0 / (2.0 + 1.0 / self.beta_alpha))
    }

    /// `ψ_n`, the rate normalisation.
    pub fn psi_n(&self, n: usize) -> f64 {
        let (exponent, log_power) = theoretical_rate(self);
        ((n as f64).ln()).powf(log_power) * self.delta_n(n).powf(exponent)
    }
}

/// `(exponent of δ_n, power of ln n)` of the rate in the current regime.
pub fn theoretical_rate(spec: &RateSpec) -> (f64, f64) {
    let b = spec.beta_alpha;
    let p = spec.p;
    let t = spec.t_grid();
    match spec.regime {
        Regime::Sparse => ((1.0 - 1.0 / p) * b / (b + 1.0), t / p),
        Regime::Boundary => ((1.0 - 1.0 / p) * b / (b + 1.0), t.max(1.0) / p),
        Regime::Dense => (b / (2.0 * b + 1.0), 0.0),
    }
}
