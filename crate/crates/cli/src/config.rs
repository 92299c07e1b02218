//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use convdens::bandwidth_grid::GridMode;
use convdens::model::{Factor1D, MixtureComponent};
use convdens::risk_lab::{GridConfig, NoiseDescription, NoiseLaw, Scenario, TargetDescription};
use convdens::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    mode: Option<GridMode>,
    k_min: Option<i32>,
    k_max: Option<i32>,
}

/// Automatic evaluation grid: `count` points per axis on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub count: usize,
}

/// Everything a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    name: Option<String>,
    target: Option<TargetDescription>,
    noise: Option<NoiseDescription>,
    kernel: Option<String>,
    grid: Option<GridFile>,
    p: Option<f64>,
    n_list: Option<Vec<usize>>,
    replicates: Option<usize>,
    seed: Option<u64>,
    quad_points: Option<usize>,
    eval: Option<EvalGrid>,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Contamination probability α ∈ [0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Noise law: none, laplace[:scale] or gaussian[:sigma].
    #[arg(long)]
    pub noise: Option<String>,
    /// Ill-posedness exponents μ, comma-separated (default 2 per axis).
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Base kernel: uniform, epanechnikov or bspline2 … bspline12 (default bspline8).
    #[arg(long)]
    pub kernel: Option<String>,
    /// Bandwidth grid mode.
    #[arg(long, value_parser = ["full", "isotropic"])]
    pub grid_mode: Option<String>,
    /// Smallest bandwidth exponent k (h = e^k).
    #[arg(long, allow_hyphen_values = true)]
    pub k_min: Option<i32>,
    /// Largest bandwidth exponent k (h = e^k).
    #[arg(long, allow_hyphen_values = true)]
    pub k_max: Option<i32>,
    /// Risk index p ≥ 1 used by the thresholds.
    #[arg(long)]
    pub p: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target density: normal[:mean:sd], uniform[:lo:hi], laplace[:scale] or bimodal.
    #[arg(long)]
    pub target: Option<String>,
    /// Dimension used with --target (product of identical factors).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "convdens-out")]
    pub out: PathBuf,
}

/// Fully resolved settings. Its canonical JSON is what the config hash covers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub name: String,
    pub target: TargetDescription,
    pub noise: NoiseDescription,
    pub kernel: String,
    pub grid: GridConfig,
    pub p: f64,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub quad_points: Option<usize>,
    pub eval: Option<EvalGrid>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

fn parse_target(spec: &str, dim: usize) -> Result<TargetDescription> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = parts[1..]
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number in target '{spec}'"))))
        .collect::<Result<Vec<f64>>>()?;
    let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
    let product = |f: Factor1D| vec![MixtureComponent { weight: 1.0, factors: vec![f; dim] }];
    let components = match parts[0].trim() {
        "normal" => product(Factor1D::Normal { mean: arg(0, 0.0), sd: arg(1, 1.0) }),
        "uniform" => product(Factor1D::Uniform { lo: arg(0, 0.0), hi: arg(1, 1.0) }),
        "laplace" => product(Factor1D::Laplace { loc: 0.0, scale: arg(0, 1.0) }),
        "bimodal" => [-1.5, 1.5]
            .iter()
            .map(|&m| MixtureComponent { weight: 0.5, factors: vec![Factor1D::Normal { mean: m, sd: 0.5 }; dim] })
            .collect(),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown target '{other}' (normal[:mean:sd], uniform[:lo:hi], laplace[:scale], bimodal)"
            )))
        }
    };
    Ok(TargetDescription { components, beta: None, radii: None })
}

impl Resolved {
    /// Merges the config file (if any) with the flags. `n_list` and
    /// `replicates` come from the subcommand.
    pub fn from_args(common: &CommonArgs, n_list: Option<Vec<usize>>, replicates: Option<usize>) -> Result<Self> {
        let file: FileConfig = match &common.config {
            Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            None => FileConfig::default(),
        };
        let dim = common.dim.unwrap_or(1);
        if dim == 0 {
            return Err(Error::InvalidInput("--dim must be positive".into()));
        }
        let target = match &common.target {
            Some(spec) => parse_target(spec, dim)?,
            None => file.target.unwrap_or_else(|| TargetDescription::standard_normal(dim)),
        };
        let mut noise = file.noise.unwrap_or_else(NoiseDescription::direct);
        if let Some(a) = common.alpha {
            noise.alpha = a;
        }
        if let Some(law) = &common.noise {
            noise.law = NoiseDescription::parse_law(law)?;
        }
        if let Some(mu) = &common.mu {
            noise.mu = Some(mu.clone());
        }
        if !(0.0..=1.0).contains(&noise.alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {}", noise.alpha)));
        }
        if noise.alpha > 0.0 && noise.law == NoiseLaw::None {
            return Err(Error::InvalidInput("alpha > 0 needs a noise law (--noise laplace|gaussian)".into()));
        }
        let fg = file.grid.unwrap_or_default();
        let mode = match &common.grid_mode {
            Some(m) => m.parse()?,
            None => fg.mode.unwrap_or(GridMode::Isotropic),
        };
        let grid = GridConfig { mode, k_min: common.k_min.or(fg.k_min), k_max: common.k_max.or(fg.k_max) };
        let p = common.p.or(file.p).unwrap_or(2.0);
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("p must be >= 1, got {p}")));
        }
        let kernel = common.kernel.clone().or(file.kernel).unwrap_or_else(|| "bspline8".into());
        convdens::kernel_lab::BaseKernel::from_name(&kernel)?;
        Ok(Resolved {
            name: file.name.unwrap_or_else(|| "run".into()),
            target,
            noise,
            kernel,
            grid,
            p,
            n_list: n_list.or(file.n_list).unwrap_or_default(),
            replicates: replicates.or(file.replicates).unwrap_or(1),
            seed: common.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            quad_points: file.quad_points,
            eval: file.eval,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// SHA-256 of the canonical JSON of the resolved settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("settings serialize");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            name: self.name.clone(),
            target: self.target.clone(),
            noise: self.noise.clone(),
            kernel: self.kernel.clone(),
            grid: self.grid,
            p: self.p,
            n_list: self.n_list.clone(),
            replicates: self.replicates,
            seed: self.seed,
            quad_points: self.quad_points,
        }
    }

    /// Comment line opening every CSV output.
    pub fn csv_banner(&self, command: &str) -> String {
        format!("# convdens {command} config_hash={} seed={}\n", self.hash(), self.seed)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common() -> CommonArgs {
        CommonArgs {
            config: None,
            alpha: None,
            noise: None,
            mu: None,
            kernel: None,
            grid_mode: None,
            k_min: None,
            k_max: None,
            p: None,
            seed: None,
            target: None,
            dim: None,
            out: PathBuf::from("x"),
        }
    }

    #[test]
    fn defaults_and_hash_stability() {
        let a = Resolved::from_args(&common(), None, None).unwrap();
        assert_eq!(a.kernel, "bspline8");
        assert_eq!(a.p, 2.0);
        assert_eq!(a.hash(), Resolved::from_args(&common(), None, None).unwrap().hash());
        let mut c = common();
        c.seed = Some(5);
        assert_ne!(a.hash(), Resolved::from_args(&c, None, None).unwrap().hash());
    }

    #[test]
    fn noise_flags_validate() {
        let mut c = common();
        c.alpha = Some(0.5);
        assert!(Resolved::from_args(&c, None, None).is_err());
        c.noise = Some("laplace:2".into());
        let r = Resolved::from_args(&c, None, None).unwrap();
        assert_eq!(r.noise.law, NoiseLaw::Laplace { scale: 2.0 });
        c.alpha = Some(1.5);
        assert!(Resolved::from_args(&c, None, None).is_err());
    }

    #[test]
    fn target_specs() {
        assert_eq!(parse_target("bimodal", 2).unwrap().components.len(), 2);
        assert_eq!(parse_target("uniform:-1:1", 1).unwrap().dim(), 1);
        assert!(parse_target("cauchy", 1).is_err());
    }
}
