use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::NoiseModel;
use super::target::TargetSpec;
use crate::error::{Error, Result};
use crate::util::{fmt17, stream_rng};

/// Observations `Z_1, …, Z_n` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    points: Vec<f64>,
    dim: usize,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl Sample {
    pub fn new(points: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not split into rows of {dim}",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate {bad}")));
        }
        Ok(Sample { points, dim, seed })
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn meta(&self) -> SampleMeta {
        SampleMeta { n: self.n(), d: self.dim, seed: self.seed }
    }

    /// One row per observation, `d` comma-separated columns, no header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.meta()).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    /// Parses the CSV layout written by [`Sample::write_csv`]. Blank lines and
    /// lines starting with `#` are skipped; a non-numeric first line is taken
    /// as a header.
    pub fn parse_csv(text: &str, seed: u64) -> Result<Self> {
        let mut points = Vec::new();
        let mut dim: Option<usize> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if dim.is_none() && points.is_empty() => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
            };
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Parse(format!(
                        "line {}: expected {d} columns, found {}",
                        lineno + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            points.extend(row);
        }
        match dim {
            None => Err(Error::EmptySample),
            Some(d) => Sample::new(points, d, seed),
        }
    }

    pub fn read_csv(path: &Path, seed: u64) -> Result<Self> {
        Self::parse_csv(&fs::read_to_string(path)?, seed)
    }
}

/// Draws `Z_i = X_i + ε_i·Y_i` with `X ~ f`, `Y ~ g`, `ε ~ Bernoulli(α)`.
///
/// The three ingredients come from separate ChaCha streams of `seed`, so the
/// `X` draws do not depend on `α` or on the noise law.
pub fn sample_model(target: &TargetSpec, model: &NoiseModel, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let d = target.dim();
    if model.dim() != d {
        return Err(Error::InvalidInput(format!("target has d={d}, noise has d={}", model.dim())));
    }
    let alpha = model.alpha();
    let noisy = alpha > 0.0;
    if noisy && !model.has_sampler() {
        return Err(Error::MissingSampler("custom noise"));
    }
    if !target.has_sampler() {
        return Err(Error::MissingSampler("custom target"));
    }
    let mut x_rng = stream_rng(seed, 0);
    let mut y_rng = stream_rng(seed, 1);
    let mut e_rng = stream_rng(seed, 2);
    let mut points = vec![0.0; n * d];
    let mut y = vec![0.0; d];
    for row in points.chunks_exact_mut(d) {
        target.sample_into(&mut x_rng, row)?;
        if noisy {
            model.sample_noise(&mut y_rng, &mut y)?;
            if e_rng.gen::<f64>() < alpha {
                for (z, yj) in row.iter_mut().zip(&y) {
                    *z += yj;
                }
            }
        }
    }
    Sample::new(points, d, seed)
}

/// Draws `n` points from the target alone, using the same stream as [`sample_model`].
pub fn sample_target(target: &TargetSpec, n: usize, seed: u64) -> Result<Sample> {
    let d = target.dim();
    let mut rng = stream_rng(seed, 0);
    let mut points = vec![0.0; n * d];
    for row in points.chunks_exact_mut(d) {
        target.sample_into(&mut rng, row)?;
    }
    Sample::new(points, d, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseKind;

    #[test]
    fn csv_parse_edge_cases() {
        assert!(matches!(Sample::parse_csv("", 0), Err(Error::EmptySample)));
        assert!(matches!(Sample::parse_csv("# only a comment\n\n", 0), Err(Error::EmptySample)));
        let s = Sample::parse_csv("x,y\n1,2\n3,4\n", 0).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.dim(), 2);
        assert!(Sample::parse_csv("1,2\n3\n", 0).is_err());
        assert!(Sample::parse_csv("1\nabc\n", 0).is_err());
        assert!(Sample::parse_csv("1\nNaN\n", 0).is_err());
    }

    #[test]
    fn alpha_zero_reproduces_target_draws() {
        let t = TargetSpec::standard_normal(1);
        let m = NoiseModel::new(0.0, NoiseKind::Laplace { scale: 1.0 }, 1).unwrap();
        let z = sample_model(&t, &m, 100, 42).unwrap();
        let x = sample_target(&t, 100, 42).unwrap();
        assert_eq!(z.points(), x.points());
    }

    #[test]
    fn alpha_one_adds_noise_everywhere() {
        let t = TargetSpec::standard_normal(2);
        let m = NoiseModel::new(1.0, NoiseKind::Laplace { scale: 1.0 }, 2).unwrap();
        let z = sample_model(&t, &m, 100, 9).unwrap();
        let x = sample_target(&t, 100, 9).unwrap();
        let mut y_rng = stream_rng(9, 1);
        let mut y = vec![0.0; 2];
        for i in 0..100 {
            m.sample_noise(&mut y_rng, &mut y).unwrap();
            for j in 0..2 {
                assert_eq!(z.point(i)[j], x.point(i)[j] + y[j]);
            }
        }
    }

    #[test]
    fn missing_sampler_reported() {
        let kind = NoiseKind::Custom {
            char_fn: std::sync::Arc::new(|_| Ok(num_complex::Complex64::new(1.0, 0.0))),
            sampler: None,
            real_positive: true,
        };
        let t = TargetSpec::standard_normal(1);
        let m = NoiseModel::new(0.5, kind.clone(), 1).unwrap();
        assert!(matches!(sample_model(&t, &m, 10, 1), Err(Error::MissingSampler(_))));
        let m0 = NoiseModel::new(0.0, kind, 1).unwrap();
        assert!(sample_model(&t, &m0, 10, 1).is_ok());
    }
}
