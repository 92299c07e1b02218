use serde::{Deserialize, Serialize};

use crate::bandwidth_grid::{GridMode, GridRange};
use crate::error::{Error, Result};
use crate::kernel_lab::{BaseKernel, KernelSpec};
use crate::model::{FrequencyProbe, MixtureComponent, NoiseKind, NoiseModel, TargetSpec};

/// Serializable noise law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseLaw {
    None,
    Laplace { scale: f64 },
    Gaussian { sigma: f64 },
}

/// Serializable contamination model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDescription {
    pub alpha: f64,
    pub law: NoiseLaw,
    /// Overrides the ill-posedness exponents (defaults: 2 for built-in laws).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

impl NoiseDescription {
    pub fn direct() -> Self {
        NoiseDescription { alpha: 0.0, law: NoiseLaw::None, mu: None }
    }

    /// Parses `none`, `laplace:<scale>` or `gaussian:<sigma>`.
    pub fn parse_law(text: &str) -> Result<NoiseLaw> {
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (text, None),
        };
        let value = |default: f64| -> Result<f64> {
            arg.map(|a| a.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad noise parameter in '{text}'"))))
                .unwrap_or(Ok(default))
        };
        match name.trim() {
            "none" => Ok(NoiseLaw::None),
            "laplace" => Ok(NoiseLaw::Laplace { scale: value(1.0)? }),
            "gaussian" => Ok(NoiseLaw::Gaussian { sigma: value(1.0)? }),
            other => Err(Error::InvalidInput(format!("unknown noise '{other}' (none, laplace[:scale], gaussian[:sigma])"))),
        }
    }

    /// Builds and certifies the model.
    pub fn build(&self, dim: usize) -> Result<NoiseModel> {
        let kind = match self.law {
            NoiseLaw::None => NoiseKind::None,
            NoiseLaw::Laplace { scale } => NoiseKind::Laplace { scale },
            NoiseLaw::Gaussian { sigma } => NoiseKind::Gaussian { sigma },
        };
        if self.alpha > 0.0 && kind_is_none(&kind) {
            return Err(Error::InvalidInput("alpha > 0 requires a noise law".into()));
        }
        let mut model = NoiseModel::new(self.alpha, kind, dim)?;
        if let Some(mu) = &self.mu {
            model = model.with_mu(mu.clone())?;
        }
        model.certify(&default_probe(dim))?;
        Ok(model)
    }
}

fn kind_is_none(kind: &NoiseKind) -> bool {
    matches!(kind, NoiseKind::None)
}

/// Probe used when certifying models built from descriptions.
pub fn default_probe(dim: usize) -> FrequencyProbe {
    FrequencyProbe::for_band(if dim == 1 { 2000.0 } else { 200.0 }, dim)
}

/// Serializable product-mixture target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDescription {
    pub components: Vec<MixtureComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

impl TargetDescription {
    pub fn standard_normal(dim: usize) -> Self {
        use crate::model::Factor1D;
        TargetDescription {
            components: vec![MixtureComponent { weight: 1.0, factors: vec![Factor1D::Normal { mean: 0.0, sd: 1.0 }; dim] }],
            beta: None,
            radii: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.factors.len())
    }

    pub fn build(&self) -> Result<TargetSpec> {
        let t = TargetSpec::product_mixture(self.components.clone())?;
        match (&self.beta, &self.radii) {
            (Some(b), Some(r)) => t.with_smoothness(b.clone(), r.clone()),
            (Some(b), None) => t.with_smoothness(b.clone(), vec![1.0; b.len()]),
            _ => Ok(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub mode: GridMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<i32>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { mode: GridMode::Isotropic, k_min: None, k_max: None }
    }
}

impl GridConfig {
    pub fn range(&self) -> GridRange {
        GridRange { k_min: self.k_min, k_max: self.k_max }
    }
}

/// A complete, replayable Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub target: TargetDescription,
    pub noise: NoiseDescription,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_p")]
    pub p: f64,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Quadrature nodes per axis for the `L_p` risk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
}

fn default_kernel() -> String {
    BaseKernel::default().name()
}

fn default_p() -> f64 {
    2.0
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        Ok(KernelSpec::new(BaseKernel::from_name(&self.kernel)?, self.dim()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be positive".into()));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 3) {
            return Err(Error::InvalidInput(format!("n_list must be non-empty with every n >= 3, got {:?}", self.n_list)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidInput(format!("p must be >= 1, got {}", self.p)));
        }
        if self.dim() == 0 {
            return Err(Error::InvalidInput("target has no components".into()));
        }
        BaseKernel::from_name(&self.kernel)?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
name = "demo"
p = 4.0
n_list = [256, 512]
replicates = 3
seed = 11

[target]
components = [{ weight = 1.0, factors = [{ kind = "normal", mean = 0.0, sd = 1.0 }] }]

[noise]
alpha = 0.5
law = { kind = "laplace", scale = 1.0 }
"#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.kernel, "bspline8");
        assert_eq!(s.grid.mode, GridMode::Isotropic);
        assert_eq!(s.noise.law, NoiseLaw::Laplace { scale: 1.0 });
        let again: Scenario = toml::from_str(&toml::to_string(&s).unwrap()).unwrap();
        assert_eq!(again, s);
        let model = s.noise.build(1).unwrap();
        assert_eq!(model.epsilon(), Some(0.5));
    }

    #[test]
    fn validation_errors() {
        let mut s = Scenario {
            name: "x".into(),
            target: TargetDescription::standard_normal(1),
            noise: NoiseDescription::direct(),
            kernel: "bspline8".into(),
            grid: GridConfig::default(),
            p: 2.0,
            n_list: vec![100],
            replicates: 0,
            seed: 1,
            quad_points: None,
        };
        assert!(s.validate().is_err());
        s.replicates = 1;
        s.kernel = "nope".into();
        assert!(matches!(s.validate(), Err(Error::UnknownKernel { .. })));
    }

    #[test]
    fn parse_noise_laws() {
        assert_eq!(NoiseDescription::parse_law("laplace:0.5").unwrap(), NoiseLaw::Laplace { scale: 0.5 });
        assert_eq!(NoiseDescription::parse_law("gaussian").unwrap(), NoiseLaw::Gaussian { sigma: 1.0 });
        assert!(NoiseDescription::parse_law("cauchy").is_err());
        assert!(NoiseDescription::parse_law("laplace:x").is_err());
    }
}
