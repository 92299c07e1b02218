//! The pointwise selection rule `ĥ(x) = argmin_h R̂_h(x) + 8Û*_n(x,h)`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::estimator_bank::EstimatorSurface;
use crate::util::fmt17;

/// `R̂_h(x)` for member `a` at row `i`:
/// `sup_η [|f̂_{h∨η} − f̂_η| − 4Û(h∨η) − 4Û(η)]_+`.
pub fn r_hat(surface: &EstimatorSurface, i: usize, a: usize) -> f64 {
    let grid = surface.grid();
    let (f, u) = (surface.f_hat_row(i), surface.u_hat_row(i));
    (0..grid.len()).fold(0.0, |acc, b| {
        let j = grid.join(a, b);
        acc.max((f[j] - f[b]).abs() - 4.0 * u[j] - 4.0 * u[b])
    })
}

fn r_hat_row(surface: &EstimatorSurface, i: usize) -> Vec<f64> {
    (0..surface.grid().len()).map(|a| r_hat(surface, i, a)).collect()
}

/// Full `R̂` and objective matrices (`m × |grid|`, row-major).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionDiagnostics {
    pub r_hat: Vec<f64>,
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub dim: usize,
    pub eval_points: Vec<f64>,
    /// Grid index of `ĥ(x)`.
    pub chosen: Vec<usize>,
    pub chosen_k: Vec<Vec<i32>>,
    pub chosen_h: Vec<Vec<f64>>,
    /// `f̂_{ĥ(x)}(x)`.
    pub estimate: Vec<f64>,
    /// Minimised objective `R̂ + 8Û*`.
    pub r_hat_min: Vec<f64>,
    /// `ĥ(x)` has an exponent on the edge of the truncated range.
    pub boundary_hit: Vec<bool>,
    pub diagnostics: Option<SelectionDiagnostics>,
}

/// Applies the selection rule at every evaluation point. Exact objective
/// ties go to the earliest grid member, i.e. the largest `V_h` and then the
/// lexicographically smallest exponent vector.
pub fn select(surface: &EstimatorSurface, keep_diagnostics: bool) -> SelectionResult {
    let grid = surface.grid();
    let rows: Vec<(usize, f64, Vec<f64>, Vec<f64>)> = (0..surface.rows())
        .into_par_iter()
        .map(|i| {
            let r = r_hat_row(surface, i);
            let star = surface.u_star_row(i);
            let obj: Vec<f64> = r.iter().zip(star).map(|(r, s)| r + 8.0 * s).collect();
            let mut best = 0;
            for a in 1..obj.len() {
                if obj[a] < obj[best] {
                    best = a;
                }
            }
            (best, obj[best], r, obj)
        })
        .collect();
    let mut result = SelectionResult {
        dim: surface.dim(),
        eval_points: surface.eval_points().to_vec(),
        chosen: Vec::with_capacity(rows.len()),
        chosen_k: Vec::with_capacity(rows.len()),
        chosen_h: Vec::with_capacity(rows.len()),
        estimate: Vec::with_capacity(rows.len()),
        r_hat_min: Vec::with_capacity(rows.len()),
        boundary_hit: Vec::with_capacity(rows.len()),
        diagnostics: None,
    };
    let mut diag = SelectionDiagnostics { r_hat: Vec::new(), objective: Vec::new() };
    for (i, (best, value, r, obj)) in rows.into_iter().enumerate() {
        result.chosen.push(best);
        result.chosen_k.push(grid.exponents(best).to_vec());
        result.chosen_h.push(grid.h(best).to_vec());
        result.estimate.push(surface.f_hat_row(i)[best]);
        result.r_hat_min.push(value);
        result.boundary_hit.push(grid.on_boundary(best));
        if keep_diagnostics {
            diag.r_hat.extend(r);
            diag.objective.extend(obj);
        }
    }
    if keep_diagnostics {
        result.diagnostics = Some(diag);
    }
    result
}

/// Outcome of checking `|f̂_ĥ − f̂_h| ≤ 2R̂_h + 16Û*_h` at every `(x, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityAudit {
    pub checked: usize,
    pub violations: usize,
    /// Smallest value of `2R̂_h + 16Û*_h − |f̂_ĥ − f̂_h|` seen.
    pub min_margin: f64,
}

/// Floating-point slack allowed by the audit.
pub const INEQUALITY_SLACK: f64 = 1e-12;

/// Verifies the data-only selection inequality for every point and member.
pub fn audit_selection_inequality(surface: &EstimatorSurface, result: &SelectionResult) -> InequalityAudit {
    let per_row: Vec<InequalityAudit> = (0..surface.rows())
        .into_par_iter()
        .map(|i| {
            let f = surface.f_hat_row(i);
            let star = surface.u_star_row(i);
            let chosen = f[result.chosen[i]];
            let mut audit = InequalityAudit { checked: 0, violations: 0, min_margin: f64::INFINITY };
            for a in 0..f.len() {
                let margin = 2.0 * r_hat(surface, i, a) + 16.0 * star[a] - (chosen - f[a]).abs();
                audit.checked += 1;
                if margin < -INEQUALITY_SLACK {
                    audit.violations += 1;
                }
                audit.min_margin = audit.min_margin.min(margin);
            }
            audit
        })
        .collect();
    per_row.into_iter().fold(
        InequalityAudit { checked: 0, violations: 0, min_margin: f64::INFINITY },
        |acc, r| InequalityAudit {
            checked: acc.checked + r.checked,
            violations: acc.violations + r.violations,
            min_margin: acc.min_margin.min(r.min_margin),
        },
    )
}

impl SelectionResult {
    pub fn rows(&self) -> usize {
        self.chosen.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.eval_points[i * self.dim..(i + 1) * self.dim]
    }

    /// Values clipped at zero, with the integrated clipped mass under a
    /// cell volume (`None` when the points are not a regular grid).
    pub fn clipped(&self, cell_volume: Option<f64>) -> (Vec<f64>, Option<f64>) {
        let clipped: Vec<f64> = self.estimate.iter().map(|v| v.max(0.0)).collect();
        let mass = cell_volume.map(|c| self.estimate.iter().map(|v| (-v).max(0.0)).sum::<f64>() * c);
        (clipped, mass)
    }

    /// CSV: `x…, k…, estimate, objective, boundary_hit`.
    pub fn write_csv<W: Write>(&self, mut out: W, estimates: Option<&[f64]>) -> Result<()> {
        let d = self.dim;
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.extend((1..=d).map(|j| format!("k{j}")));
        header.extend(["estimate", "objective", "boundary_hit"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        let values = estimates.unwrap_or(&self.estimate);
        for i in 0..self.rows() {
            let mut cells: Vec<String> = self.point(i).iter().map(|&v| fmt17(v)).collect();
            cells.extend(self.chosen_k[i].iter().map(|k| k.to_string()));
            cells.push(fmt17(values[i]));
            cells.push(fmt17(self.r_hat_min[i]));
            cells.push(u8::from(self.boundary_hit[i]).to_string());
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, estimates: Option<&[f64]>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), estimates)
    }

    /// Long-format diagnostics: `x…, k…, r_hat, objective`.
    pub fn write_diagnostics<W: Write>(&self, surface: &EstimatorSurface, mut out: W) -> Result<()> {
        let Some(diag) = &self.diagnostics else {
            return Ok(());
        };
        let d = self.dim;
        let grid = surface.grid();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.extend((1..=d).map(|j| format!("k{j}")));
        header.extend(["r_hat", "objective"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.rows() {
            for a in 0..grid.len() {
                let mut cells: Vec<String> = self.point(i).iter().map(|&v| fmt17(v)).collect();
                cells.extend(grid.exponents(a).iter().map(|k| k.to_string()));
                let k = i * grid.len() + a;
                cells.push(fmt17(diag.r_hat[k]));
                cells.push(fmt17(diag.objective[k]));
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }
}
