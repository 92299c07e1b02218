use serde::Serialize;

use super::truth::observation_support;
use crate::error::{Error, Result};
use crate::model::{NoiseModel, TargetSpec};

/// Largest truth mass allowed outside the quadrature box.
pub const MASS_DEFICIT_TOL: f64 = 1e-4;

/// Tensor-product composite trapezoidal rule on a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
}

impl QuadGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || counts.len() != d {
            return Err(Error::InvalidInput("quadrature box needs matching lo, hi and counts".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b && a.is_finite() && b.is_finite())) || counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidInput("quadrature box needs lo < hi and at least two nodes per axis".into()));
        }
        Ok(QuadGrid { lo, hi, counts })
    }

    /// Default nodes per axis: 801 in one dimension, 81 otherwise.
    pub fn default_points(d: usize) -> usize {
        if d == 1 {
            801
        } else {
            81
        }
    }

    /// The `L_p` domain: target support padded by six noise standard deviations.
    pub fn for_model(target: &TargetSpec, model: &NoiseModel, points: Option<usize>) -> Result<Self> {
        let support = observation_support(target, model);
        let d = support.len();
        let c = points.unwrap_or_else(|| Self::default_points(d));
        Self::new(support.iter().map(|s| s.0).collect(), support.iter().map(|s| s.1).collect(), vec![c; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn step(&self, j: usize) -> f64 {
        (self.hi[j] - self.lo[j]) / (self.counts[j] - 1) as f64
    }

    /// Same box with every step halved.
    pub fn refined(&self) -> Self {
        QuadGrid { lo: self.lo.clone(), hi: self.hi.clone(), counts: self.counts.iter().map(|c| 2 * c - 1).collect() }
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            idx[j] = flat % self.counts[j];
            flat /= self.counts[j];
        }
        idx
    }

    /// Nodes, row-major with the last axis fastest, flattened.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len() * d);
        for flat in 0..self.len() {
            for (j, k) in self.multi_index(flat).into_iter().enumerate() {
                out.push(self.lo[j] + k as f64 * self.step(j));
            }
        }
        out
    }

    /// Trapezoid weights matching [`QuadGrid::points`].
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|flat| {
                self.multi_index(flat)
                    .into_iter()
                    .enumerate()
                    .map(|(j, k)| {
                        let h = self.step(j);
                        if k == 0 || k == self.counts[j] - 1 {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect()
    }

    /// Cell volume, used for clipped-mass reports.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.step(j)).product()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Truth values at the nodes, checking that the box holds the target mass.
pub fn truth_on_grid(target: &TargetSpec, grid: &QuadGrid) -> Result<Vec<f64>> {
    let values: Vec<f64> = grid.points().chunks(grid.dim()).map(|x| target.pdf(x)).collect();
    let missing = 1.0 - grid.integrate(&values);
    if missing > MASS_DEFICIT_TOL {
        return Err(Error::SupportNotCovered { missing });
    }
    Ok(values)
}

/// `(∫|f̂ − f|^p)^{1/p}` by the trapezoidal rule, with both functions given at the nodes.
pub fn lp_distance_values(estimate: &[f64], truth: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if estimate.len() != truth.len() || truth.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} estimate values, {} truth values, {} weights",
            estimate.len(),
            truth.len(),
            weights.len()
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    let s: f64 = estimate.iter().zip(truth).zip(weights).map(|((e, t), w)| w * (e - t).abs().powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// `L_p` distance between an estimate on `grid` and the target density.
pub fn lp_distance(estimate: &[f64], target: &TargetSpec, p: f64, grid: &QuadGrid) -> Result<f64> {
    let truth = truth_on_grid(target, grid)?;
    lp_distance_values(estimate, &truth, &grid.weights(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_is_zero_and_shift_is_constant() {
        let t = TargetSpec::uniform_box(vec![0.0], vec![1.0]).unwrap();
        let g = QuadGrid::new(vec![0.0], vec![1.0], vec![101]).unwrap();
        let truth = truth_on_grid(&t, &g).unwrap();
        assert_eq!(lp_distance(&truth, &t, 2.0, &g).unwrap(), 0.0);
        let shifted: Vec<f64> = truth.iter().map(|v| v + 0.3).collect();
        assert!((lp_distance(&shifted, &t, 2.0, &g).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn uncovered_support_is_rejected() {
        let t = TargetSpec::standard_normal(1);
        let g = QuadGrid::new(vec![-1.0], vec![1.0], vec![101]).unwrap();
        assert!(matches!(lp_distance(&vec![0.0; 101], &t, 2.0, &g), Err(Error::SupportNotCovered { .. })));
    }

    #[test]
    fn step_halving_is_stable() {
        let t = TargetSpec::standard_normal(1);
        let model = NoiseModel::direct(1);
        let g = QuadGrid::for_model(&t, &model, Some(401)).unwrap();
        let est = |g: &QuadGrid| -> Vec<f64> {
            g.points().iter().map(|&x| 0.9 * (-0.5 * (x / 1.1f64).powi(2)).exp() / (1.1 * (2.0 * std::f64::consts::PI).sqrt())).collect()
        };
        let a = lp_distance(&est(&g), &t, 2.0, &g).unwrap();
        let fine = g.refined();
        let b = lp_distance(&est(&fine), &t, 2.0, &fine).unwrap();
        assert!(((a - b) / b).abs() < 5e-3, "{a} vs {b}");
    }

    #[test]
    fn two_dimensional_weights_sum_to_volume() {
        let g = QuadGrid::new(vec![0.0, -1.0], vec![2.0, 1.0], vec![11, 21]).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
        assert_eq!(g.points().len(), 2 * 231);
        assert_eq!(&g.points()[2..4], &[0.0, -0.9]);
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            a in prop::collection::vec(-2.0f64..2.0, 33),
            b in prop::collection::vec(-2.0f64..2.0, 33),
            c in prop::collection::vec(-2.0f64..2.0, 33),
            p in 1.0f64..6.0,
        ) {
            let w = QuadGrid::new(vec![0.0], vec![1.0], vec![33]).unwrap().weights();
            let ab = lp_distance_values(&a, &b, &w, p).unwrap();
            let bc = lp_distance_values(&b, &c, &w, p).unwrap();
            let ac = lp_distance_values(&a, &c, &w, p).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
