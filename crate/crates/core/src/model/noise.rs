use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::RngCore;

use super::factor::AxisNoise;
use crate::error::{Error, Result};

/// Characteristic function of a user-supplied noise law.
pub type CharFn = Arc<dyn Fn(&[f64]) -> std::result::Result<Complex64, String> + Send + Sync>;
/// Draws one noise vector into the output slice.
pub type NoiseSampler = Arc<dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync>;

/// Certified margins below this are treated as a failed assumption.
pub const MIN_MARGIN: f64 = 1e-6;

#[derive(Clone)]
pub enum NoiseKind {
    None,
    Laplace { scale: f64 },
    Gaussian { sigma: f64 },
    Custom {
        char_fn: CharFn,
        sampler: Option<NoiseSampler>,
        /// Caller asserts that the characteristic function is real and positive.
        real_positive: bool,
    },
}

impl fmt::Debug for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::None => write!(f, "None"),
            NoiseKind::Laplace { scale } => write!(f, "Laplace {{ scale: {scale} }}"),
            NoiseKind::Gaussian { sigma } => write!(f, "Gaussian {{ sigma: {sigma} }}"),
            NoiseKind::Custom { sampler, real_positive, .. } => write!(
                f,
                "Custom {{ sampler: {}, real_positive: {real_positive} }}",
                sampler.is_some()
            ),
        }
    }
}

/// Frequencies at which the noise assumption is probed.
#[derive(Debug, Clone)]
pub struct FrequencyProbe {
    pub t_max: f64,
    pub per_axis: usize,
}

impl FrequencyProbe {
    /// Probe covering `[-2·band, 2·band]^d` (synthesis band plus guard band).
    pub fn for_band(band: f64, d: usize) -> Self {
        let per_axis = match d {
            1 => 2000,
            2 => 60,
            _ => 12,
        };
        FrequencyProbe { t_max: 2.0 * band, per_axis }
    }

    /// Per-axis frequencies: 0 and ± a log-spaced ladder up to `t_max`.
    pub fn axis_points(&self) -> Vec<f64> {
        let k = self.per_axis.max(2);
        let lo = (self.t_max * 1e-4).ln();
        let hi = self.t_max.ln();
        let mut pts = vec![0.0];
        for i in 0..k {
            let t = (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp();
            pts.push(t);
            pts.push(-t);
        }
        pts
    }

    /// Visits every point of the tensor probe grid.
    pub fn for_each(&self, d: usize, mut visit: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
        let axis = self.axis_points();
        let mut idx = vec![0usize; d];
        let mut t = vec![0.0; d];
        loop {
            for j in 0..d {
                t[j] = axis[idx[j]];
            }
            visit(&t)?;
            let mut j = 0;
            loop {
                if j == d {
                    return Ok(());
                }
                idx[j] += 1;
                if idx[j] < axis.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
}

/// The contamination model `p = (1 − α)f + α(f ⋆ g)`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    alpha: f64,
    kind: NoiseKind,
    dim: usize,
    mu: Vec<f64>,
    epsilon: Option<f64>,
    upsilon0: Option<f64>,
}

impl NoiseModel {
    pub fn new(alpha: f64, kind: NoiseKind, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let mu = match &kind {
            NoiseKind::Laplace { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidInput(format!("laplace scale must be > 0, got {scale}")));
                }
                vec![2.0; dim]
            }
            NoiseKind::Gaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidInput(format!("gaussian sigma must be > 0, got {sigma}")));
                }
                vec![2.0; dim]
            }
            NoiseKind::None | NoiseKind::Custom { .. } => vec![0.0; dim],
        };
        Ok(NoiseModel { alpha, kind, dim, mu, epsilon: None, upsilon0: None })
    }

    /// Direct observations (`α = 0`).
    pub fn direct(dim: usize) -> Self {
        NoiseModel::new(0.0, NoiseKind::None, dim).expect("valid direct model")
    }

    /// Overrides the ill-posedness exponents. Clears any previous certification.
    pub fn with_mu(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.dim || mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "mu must have {} finite non-negative entries, got {mu:?}",
                self.dim
            )));
        }
        self.mu = mu;
        self.epsilon = None;
        self.upsilon0 = None;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn is_pure_convolution(&self) -> bool {
        self.alpha == 1.0
    }

    /// `γ(α)`: the exponents `μ` when `α = 1`, zero otherwise.
    pub fn gamma(&self) -> Vec<f64> {
        if self.is_pure_convolution() {
            self.mu.clone()
        } else {
            vec![0.0; self.dim]
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn upsilon0(&self) -> Option<f64> {
        self.upsilon0
    }

    /// The certified margin that enters `M_∞`: `ε` for `α < 1`, `Υ₀` for `α = 1`.
    pub fn margin(&self) -> Option<f64> {
        if self.is_pure_convolution() {
            self.upsilon0
        } else {
            self.epsilon
        }
    }

    /// Per-axis law when the noise is a product of built-in one-dimensional laws.
    pub fn axis_noise(&self) -> Option<AxisNoise> {
        match self.kind {
            NoiseKind::None => Some(AxisNoise::Dirac),
            NoiseKind::Laplace { scale } => Some(AxisNoise::Laplace { scale }),
            NoiseKind::Gaussian { sigma } => Some(AxisNoise::Gaussian { sigma }),
            NoiseKind::Custom { .. } => None,
        }
    }

    /// Marginal standard deviation of one noise coordinate (built-ins only).
    pub fn noise_sd(&self) -> Option<f64> {
        self.axis_noise().map(|a| a.sd())
    }

    pub fn has_sampler(&self) -> bool {
        match &self.kind {
            NoiseKind::Custom { sampler, .. } => sampler.is_some(),
            _ => true,
        }
    }

    fn real_positive(&self) -> bool {
        match &self.kind {
            NoiseKind::Custom { real_positive, .. } => *real_positive,
            _ => true,
        }
    }

    /// `ǧ(t) = ∫ g(x) exp(−i⟨x, t⟩) dx`.
    pub fn char_fn(&self, t: &[f64]) -> Result<Complex64> {
        if t.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "frequency has dimension {}, model has {}",
                t.len(),
                self.dim
            )));
        }
        match &self.kind {
            NoiseKind::Custom { char_fn, .. } => char_fn(t).map_err(Error::Evaluation),
            _ => {
                let axis = self.axis_noise().expect("built-in noise");
                Ok(Complex64::new(t.iter().map(|&tj| axis.char_fn(tj)).product(), 0.0))
            }
        }
    }

    /// `(1 − α) + α·ǧ(−t)`, the Fourier multiplier of the observation operator.
    pub fn operator_symbol(&self, t: &[f64]) -> Result<Complex64> {
        let neg: Vec<f64> = t.iter().map(|x| -x).collect();
        Ok((1.0 - self.alpha) + self.alpha * self.char_fn(&neg)?)
    }

    pub(crate) fn sample_noise(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            NoiseKind::Custom { sampler, .. } => {
                let s = sampler.as_ref().ok_or(Error::MissingSampler("custom noise"))?;
                s(rng, out);
            }
            _ => {
                let axis = self.axis_noise().expect("built-in noise");
                for v in out.iter_mut() {
                    *v = axis.sample(rng);
                }
            }
        }
        Ok(())
    }

    /// Certifies the lower bound on the operator symbol and stores it.
    ///
    /// For `α < 1` this is `ε = inf |1 − α + α·ǧ(t)|`, using the analytic
    /// lower bounds `1 − 2α` (`α < 1/2`) and `1 − α` (real positive `ǧ`)
    /// whenever they apply. For `α = 1` it is
    /// `Υ₀ = inf |ǧ(t)|·∏(1 + t_j²)^{μ_j/2}`.
    pub fn certify(&mut self, probe: &FrequencyProbe) -> Result<f64> {
        let value = if self.is_pure_convolution() {
            self.certify_pure(probe)?
        } else {
            self.certify_mixed(probe)?
        };
        if !(value >= MIN_MARGIN) {
            return Err(Error::AssumptionViolated(format!(
                "certified margin {value:.3e} is below {MIN_MARGIN:.0e}"
            )));
        }
        if self.is_pure_convolution() {
            self.upsilon0 = Some(value);
        } else {
            self.epsilon = Some(value);
        }
        Ok(value)
    }

    fn probe_infimum(&self, probe: &FrequencyProbe, f: impl Fn(&[f64], Complex64) -> f64) -> Result<f64> {
        let mut inf = f64::INFINITY;
        probe.for_each(self.dim, |t| {
            let g = self.char_fn(t)?;
            inf = inf.min(f(t, g));
            Ok(())
        })?;
        Ok(inf)
    }

    fn certify_mixed(&self, probe: &FrequencyProbe) -> Result<f64> {
        let alpha = self.alpha;
        let numeric = self.probe_infimum(probe, |_, g| ((1.0 - alpha) + alpha * g).norm())?;
        let mut shortcut: Option<f64> = None;
        if alpha < 0.5 {
            shortcut = Some(1.0 - 2.0 * alpha);
        }
        if self.real_positive() {
            shortcut = Some(shortcut.map_or(1.0 - alpha, |s| s.max(1.0 - alpha)));
        }
        match shortcut {
            Some(s) => {
                if numeric < s - 1e-9 {
                    return Err(Error::AssumptionViolated(format!(
                        "probe infimum {numeric:.6e} contradicts analytic bound {s:.6e}"
                    )));
                }
                Ok(s)
            }
            None => Ok(numeric),
        }
    }

    fn certify_pure(&self, probe: &FrequencyProbe) -> Result<f64> {
        match self.kind {
            NoiseKind::None => Ok(1.0),
            NoiseKind::Gaussian { .. } => Err(Error::AssumptionViolated(
                "gaussian characteristic function decays faster than any polynomial".into(),
            )),
            NoiseKind::Laplace { scale } => {
                // (1 + t²)^{μ/2} / (1 + b²t²) per axis; the infimum factorises.
                let axis_probe = FrequencyProbe { t_max: probe.t_max, per_axis: 4000 };
                let ts = axis_probe.axis_points();
                let mut total = 1.0;
                for &mu in &self.mu {
                    let inf = if mu < 2.0 {
                        0.0
                    } else {
                        let tail = if mu == 2.0 { 1.0 / (scale * scale) } else { f64::INFINITY };
                        ts.iter()
                            .map(|&t| (1.0 + t * t).powf(0.5 * mu) / (1.0 + scale * scale * t * t))
                            .fold(tail, f64::min)
                    };
                    total *= inf;
                }
                Ok(total)
            }
            NoiseKind::Custom { .. } => {
                let mu = self.mu.clone();
                self.probe_infimum(probe, move |t, g| {
                    let w: f64 = t.iter().zip(&mu).map(|(tj, m)| (1.0 + tj * tj).powf(0.5 * m)).product();
                    g.norm() * w
                })
            }
        }
    }
}
