use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::lp::{lp_distance_values, truth_on_grid, QuadGrid};
use super::rate::{theoretical_rate, RateSpec, Regime};
use super::scenario::Scenario;
use crate::bandwidth_grid::{build_grid, BandwidthGrid};
use crate::error::{Error, Result};
use crate::estimator_bank::build_surface;
use crate::kernel_lab::{build_deconv_kernel_auto, kernel_constants, DeconvKernelTable, KernelConstants, KernelSpec, SynthesisPlan};
use crate::model::{sample_model, NoiseModel, TargetSpec};
use crate::selector::{audit_selection_inequality, select, InequalityAudit};
use crate::util::{derive_seed, fmt17};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Selected,
    Fixed,
}

/// One `(n, method)` risk estimate `(mean D^p)^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub n: usize,
    pub method: Method,
    /// Exponent vector for fixed-bandwidth rows.
    pub k: Option<Vec<i32>>,
    pub h: Option<Vec<f64>>,
    pub risk: f64,
    /// Delta-method standard error; absent with fewer than two replicates.
    pub std_error: Option<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub n: usize,
    pub selected_risk: f64,
    pub oracle_risk: f64,
    pub oracle_k: Vec<i32>,
    pub ratio: f64,
    /// Fraction of (replicate, point) selections on the edge of the truncated grid.
    pub boundary_hit_rate: f64,
    pub grid_size: usize,
}

/// Least-squares fit of `ln(risk)` against a log-abscissa.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval for the slope.
    pub half_width: f64,
    pub points: usize,
}

/// Minimum number of distinct sample sizes for a slope fit.
pub const MIN_SLOPE_POINTS: usize = 4;

impl SlopeFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
        let k = x.len();
        let mut distinct = x.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if k != y.len() || distinct.len() < MIN_SLOPE_POINTS || y.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let kf = k as f64;
        let mx = x.iter().sum::<f64>() / kf;
        let my = y.iter().sum::<f64>() / kf;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let dof = kf - 2.0;
        let se = (rss / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN);
        Some(SlopeFit { slope, intercept, half_width: t * se, points: k })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePrediction {
    pub regime: Regime,
    pub exponent: f64,
    pub log_power: f64,
}

/// Aggregated Monte Carlo results. Embeds the scenario for exact replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub scenario: Scenario,
    pub rows: Vec<RiskRow>,
    pub oracle: Vec<OracleRow>,
    /// Selected-estimator slope against `ln n`.
    pub slope: Option<SlopeFit>,
    /// Selected-estimator slope against `ln(ln n / n)`.
    pub slope_delta: Option<SlopeFit>,
    /// Empirical-oracle slope against `ln n`.
    pub oracle_slope: Option<SlopeFit>,
    pub inequality: InequalityAudit,
    pub failures: Vec<FailureRecord>,
    /// Present when the target carries nominal smoothness.
    pub rate: Option<RatePrediction>,
}

struct ReplicateOutcome {
    selected: f64,
    fixed: Vec<f64>,
    boundary_hits: usize,
    audit: InequalityAudit,
}

/// Shared, read-only inputs of one sample size.
struct Cell<'a> {
    target: &'a TargetSpec,
    model: &'a NoiseModel,
    grid: BandwidthGrid,
    tables: Vec<DeconvKernelTable>,
    consts: &'a KernelConstants,
    points: &'a [f64],
    truth: &'a [f64],
    weights: &'a [f64],
    p: f64,
}

impl Cell<'_> {
    fn replicate(&self, n: usize, seed: u64) -> Result<ReplicateOutcome> {
        let sample = sample_model(self.target, self.model, n, seed)?;
        let surface = build_surface(&sample, &self.grid, &self.tables, self.points, self.consts, self.p)?;
        let result = select(&surface, false);
        let audit = audit_selection_inequality(&surface, &result);
        let selected = lp_distance_values(&result.estimate, self.truth, self.weights, self.p)?;
        let g = self.grid.len();
        let mut column = vec![0.0; surface.rows()];
        let fixed = (0..g)
            .map(|a| {
                for (i, c) in column.iter_mut().enumerate() {
                    *c = surface.f_hat[i * g + a];
                }
                lp_distance_values(&column, self.truth, self.weights, self.p)
            })
            .collect::<Result<Vec<f64>>>()?;
        let boundary_hits = result.boundary_hit.iter().filter(|&&b| b).count();
        Ok(ReplicateOutcome { selected, fixed, boundary_hits, audit })
    }
}

/// `(mean D^p)^{1/p}` with a delta-method standard error.
fn aggregate(distances: &[f64], p: f64) -> (f64, Option<f64>) {
    let r = distances.len() as f64;
    let powers: Vec<f64> = distances.iter().map(|d| d.powf(p)).collect();
    let mean = powers.iter().sum::<f64>() / r;
    let risk = mean.powf(1.0 / p);
    if distances.len() < 2 {
        return (risk, None);
    }
    let var = powers.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let se_mean = (var / r).sqrt();
    let se = if risk > 0.0 { se_mean / (p * risk.powf(p - 1.0)) } else { 0.0 };
    (risk, Some(se))
}

fn merge(a: InequalityAudit, b: InequalityAudit) -> InequalityAudit {
    InequalityAudit {
        checked: a.checked + b.checked,
        violations: a.violations + b.violations,
        min_margin: a.min_margin.min(b.min_margin),
    }
}

/// Runs the scenario: for each `n` and replicate, sample, select, and
/// measure the `L_p` distance of the selected and of every fixed-bandwidth
/// estimator. Replicates that fail are recorded and excluded.
pub fn run_risk_experiment(scenario: &Scenario) -> Result<RiskReport> {
    scenario.validate()?;
    let d = scenario.dim();
    let target = scenario.target.build()?;
    let model = scenario.noise.build(d)?;
    let kernel = scenario.kernel_spec()?;
    run_risk_experiment_with(scenario, &target, &model, &kernel)
}

/// As [`run_risk_experiment`] with pre-built target, model and kernel.
pub fn run_risk_experiment_with(
    scenario: &Scenario,
    target: &TargetSpec,
    model: &NoiseModel,
    kernel: &KernelSpec,
) -> Result<RiskReport> {
    scenario.validate()?;
    let p = scenario.p;
    let consts = kernel_constants(kernel, model, p)?;
    let quad = QuadGrid::for_model(target, model, scenario.quad_points)?;
    let points = quad.points();
    let truth = truth_on_grid(target, &quad)?;
    let weights = quad.weights();
    let gamma = model.gamma();

    let mut table_cache: BTreeMap<Vec<i32>, DeconvKernelTable> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut oracle = Vec::new();
    let mut failures = Vec::new();
    let mut inequality = InequalityAudit { checked: 0, violations: 0, min_margin: f64::INFINITY };

    for &n in &scenario.n_list {
        let grid = build_grid(n, kernel.dim, &gamma, scenario.grid.mode, scenario.grid.range())?;
        let missing: Vec<usize> = (0..grid.len()).filter(|&a| !table_cache.contains_key(grid.exponents(a))).collect();
        let built = missing
            .par_iter()
            .map(|&a| build_deconv_kernel_auto(kernel, model, grid.h(a), &SynthesisPlan::default()))
            .collect::<Result<Vec<_>>>()?;
        for (a, t) in missing.into_iter().zip(built) {
            table_cache.insert(grid.exponents(a).to_vec(), t);
        }
        let tables: Vec<DeconvKernelTable> = (0..grid.len()).map(|a| table_cache[grid.exponents(a)].clone()).collect();
        let cell = Cell {
            target,
            model,
            grid,
            tables,
            consts: &consts,
            points: &points,
            truth: &truth,
            weights: &weights,
            p,
        };

        let outcomes: Vec<(usize, u64, Result<ReplicateOutcome>)> = (0..scenario.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(scenario.seed, n as u64, r as u64);
                (r, seed, cell.replicate(n, seed))
            })
            .collect();

        let mut selected = Vec::new();
        let mut fixed: Vec<Vec<f64>> = vec![Vec::new(); cell.grid.len()];
        let mut hits = 0usize;
        for (r, seed, outcome) in outcomes {
            match outcome {
                Ok(o) => {
                    selected.push(o.selected);
                    for (col, v) in fixed.iter_mut().zip(o.fixed) {
                        col.push(v);
                    }
                    hits += o.boundary_hits;
                    inequality = merge(inequality, o.audit);
                }
                Err(e) => failures.push(FailureRecord { n, replicate: r, seed, kind: e.kind().to_string(), message: e.to_string() }),
            }
        }
        if selected.is_empty() {
            continue;
        }
        let ok = selected.len();
        let (sel_risk, sel_se) = aggregate(&selected, p);
        rows.push(RiskRow { n, method: Method::Selected, k: None, h: None, risk: sel_risk, std_error: sel_se, replicates: ok });
        let mut best: Option<(usize, f64)> = None;
        for (a, col) in fixed.iter().enumerate() {
            let (risk, se) = aggregate(col, p);
            if best.is_none_or(|(_, b)| risk < b) {
                best = Some((a, risk));
            }
            rows.push(RiskRow {
                n,
                method: Method::Fixed,
                k: Some(cell.grid.exponents(a).to_vec()),
                h: Some(cell.grid.h(a).to_vec()),
                risk,
                std_error: se,
                replicates: ok,
            });
        }
        let (best_a, best_risk) = best.expect("grid is non-empty");
        oracle.push(OracleRow {
            n,
            selected_risk: sel_risk,
            oracle_risk: best_risk,
            oracle_k: cell.grid.exponents(best_a).to_vec(),
            ratio: sel_risk / best_risk,
            boundary_hit_rate: hits as f64 / (ok * quad.len()) as f64,
            grid_size: cell.grid.len(),
        });
    }

    let ln_n: Vec<f64> = oracle.iter().map(|o| (o.n as f64).ln()).collect();
    let ln_delta: Vec<f64> = oracle.iter().map(|o| ((o.n as f64).ln() / o.n as f64).ln()).collect();
    let ln_sel: Vec<f64> = oracle.iter().map(|o| o.selected_risk.ln()).collect();
    let ln_orc: Vec<f64> = oracle.iter().map(|o| o.oracle_risk.ln()).collect();

    let rate = match (&target.beta, &target.radii) {
        (Some(beta), radii) => {
            let radii = radii.clone().unwrap_or_else(|| vec![1.0; beta.len()]);
            let spec = RateSpec::new(beta.clone(), radii, model.alpha(), model.mu().to_vec(), p, scenario.grid.mode)?;
            let (exponent, log_power) = theoretical_rate(&spec);
            Some(RatePrediction { regime: spec.regime, exponent, log_power })
        }
        (None, _) => None,
    };

    Ok(RiskReport {
        scenario: scenario.clone(),
        slope: SlopeFit::fit(&ln_n, &ln_sel),
        slope_delta: SlopeFit::fit(&ln_delta, &ln_sel),
        oracle_slope: SlopeFit::fit(&ln_n, &ln_orc),
        rows,
        oracle,
        inequality,
        failures,
        rate,
    })
}

impl RiskReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Risk rows: `n,method,k,h,risk,std_error,replicates`; vectors are `;`-joined.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,method,k,h,risk,std_error,replicates")?;
        for r in &self.rows {
            let method = match r.method {
                Method::Selected => "selected",
                Method::Fixed => "fixed",
            };
            let k = r.k.as_ref().map(|k| k.iter().map(i32::to_string).collect::<Vec<_>>().join(";")).unwrap_or_default();
            let h = r.h.as_ref().map(|h| h.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(";")).unwrap_or_default();
            let se = r.std_error.map(fmt17).unwrap_or_default();
            writeln!(out, "{},{method},{k},{h},{},{se},{}", r.n, fmt17(r.risk), r.replicates)?;
        }
        Ok(())
    }

    /// Oracle rows: `n,selected_risk,oracle_risk,oracle_k,ratio,boundary_hit_rate,grid_size`.
    pub fn write_oracle_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,selected_risk,oracle_risk,oracle_k,ratio,boundary_hit_rate,grid_size")?;
        for o in &self.oracle {
            let k = o.oracle_k.iter().map(i32::to_string).collect::<Vec<_>>().join(";");
            writeln!(
                out,
                "{},{},{},{k},{},{},{}",
                o.n,
                fmt17(o.selected_risk),
                fmt17(o.oracle_risk),
                fmt17(o.ratio),
                fmt17(o.boundary_hit_rate),
                o.grid_size
            )?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(dir.join(format!("{stem}.csv")), buf)?;
        let mut buf = Vec::new();
        self.write_oracle_csv(&mut buf)?;
        std::fs::write(dir.join(format!("{stem}_oracle.csv")), buf)?;
        Ok(())
    }

    pub fn oracle_at(&self, n: usize) -> Option<&OracleRow> {
        self.oracle.iter().find(|o| o.n == n)
    }
}
