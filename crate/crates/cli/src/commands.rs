use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use convdens::bandwidth_grid::{build_grid, GridMode, LARGE_GRID_WARN};
use convdens::estimator_bank::{build_surface, build_tables};
use convdens::kernel_lab::{build_deconv_kernel_auto, kernel_constants, BaseKernel, KernelSpec, SynthesisPlan};
use convdens::model::{sample_model, Sample};
use convdens::risk_lab::{run_risk_experiment, Method};
use convdens::selector::{audit_selection_inequality, select};
use convdens::util::fmt17;
use convdens::{Error, Result};
use serde_json::json;

use crate::config::{ensure_dir, EvalGrid, Resolved};

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

/// Regular grid points (last axis fastest) and the cell volume.
fn grid_points(eval: &EvalGrid) -> Result<(Vec<f64>, f64)> {
    let d = eval.lo.len();
    if d == 0 || eval.hi.len() != d || eval.count < 2 {
        return Err(Error::InvalidInput("evaluation grid needs lo/hi per axis and count >= 2".into()));
    }
    let steps: Vec<f64> = (0..d).map(|j| (eval.hi[j] - eval.lo[j]) / (eval.count - 1) as f64).collect();
    if steps.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidInput("evaluation grid needs lo < hi".into()));
    }
    let total = eval.count.pow(d as u32);
    let mut pts = Vec::with_capacity(total * d);
    for mut flat in 0..total {
        let mut idx = vec![0; d];
        for j in (0..d).rev() {
            idx[j] = flat % eval.count;
            flat /= eval.count;
        }
        pts.extend(idx.iter().enumerate().map(|(j, &k)| eval.lo[j] + k as f64 * steps[j]));
    }
    Ok((pts, steps.iter().product()))
}

/// Default evaluation grid: the sample range padded by 10% on each side.
fn default_eval(sample: &Sample, count: usize) -> EvalGrid {
    let d = sample.dim();
    let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
    for row in sample.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    for j in 0..d {
        let pad = 0.1 * (hi[j] - lo[j]).max(1e-3);
        lo[j] -= pad;
        hi[j] += pad;
    }
    EvalGrid { lo, hi, count }
}

pub struct EstimateOptions {
    pub sample: PathBuf,
    pub eval_points: Option<PathBuf>,
    pub eval_count: Option<usize>,
    pub describe_grid: bool,
    pub clip_nonnegative: bool,
    pub diagnostics: bool,
}

pub fn estimate(cfg: &Resolved, out: &Path, opts: &EstimateOptions) -> Result<()> {
    let sample = Sample::read_csv(&opts.sample, cfg.seed)?;
    let d = sample.dim();
    if d != cfg.dim() {
        return Err(Error::InvalidInput(format!("sample has {d} columns but the configuration is {}-dimensional", cfg.dim())));
    }
    let model = cfg.noise.build(d)?;
    let kernel = KernelSpec::new(BaseKernel::from_name(&cfg.kernel)?, d);
    let consts = kernel_constants(&kernel, &model, cfg.p)?;
    let grid = build_grid(sample.n(), d, &model.gamma(), cfg.grid.mode, cfg.grid.range())?;
    if opts.describe_grid {
        eprintln!("{}", grid.describe());
    }
    if cfg.grid.mode == GridMode::Full && grid.len().saturating_mul(grid.len()) > LARGE_GRID_WARN {
        eprintln!(
            "warning: full grid has {} members ({}² pairs per point); consider --grid-mode isotropic",
            grid.len(),
            grid.len()
        );
    }
    let (points, cell) = match (&opts.eval_points, &cfg.eval) {
        (Some(path), _) => {
            let p = Sample::read_csv(path, 0)?;
            if p.dim() != d {
                return Err(Error::InvalidInput(format!("evaluation points have {} columns, sample has {d}", p.dim())));
            }
            (p.points().to_vec(), None)
        }
        (None, Some(eval)) if opts.eval_count.is_none() => {
            let (pts, c) = grid_points(eval)?;
            (pts, Some(c))
        }
        _ => {
            let count = opts.eval_count.unwrap_or(if d == 1 { 201 } else { 41 });
            let (pts, c) = grid_points(&default_eval(&sample, count))?;
            (pts, Some(c))
        }
    };
    let tables = build_tables(&kernel, &model, &grid, &SynthesisPlan::default())?;
    let surface = build_surface(&sample, &grid, &tables, &points, &consts, cfg.p)?;
    let result = select(&surface, opts.diagnostics);
    let audit = audit_selection_inequality(&surface, &result);

    ensure_dir(out)?;
    let (clipped, clipped_mass) = if opts.clip_nonnegative { result.clipped(cell) } else { (Vec::new(), None) };
    let mut csv = Vec::new();
    csv.extend_from_slice(cfg.csv_banner("estimate").as_bytes());
    result.write_csv(&mut csv, opts.clip_nonnegative.then_some(clipped.as_slice()))?;
    std::fs::write(out.join("density.csv"), csv)?;
    if opts.diagnostics {
        let mut diag = Vec::new();
        diag.extend_from_slice(cfg.csv_banner("estimate").as_bytes());
        result.write_diagnostics(&surface, &mut diag)?;
        std::fs::write(out.join("selection_diagnostics.csv"), diag)?;
    }
    let negative = result.estimate.iter().filter(|v| **v < 0.0).count();
    let report = json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": cfg,
        "n": sample.n(),
        "eval_points": result.rows(),
        "grid": grid.describe(),
        "constants": consts,
        "boundary_hits": result.boundary_hit.iter().filter(|b| **b).count(),
        "negative_estimates": negative,
        "clipped": opts.clip_nonnegative,
        "clipped_mass": clipped_mass,
        "inequality_audit": audit,
    });
    write(&out.join("diagnostics.json"), &json_text(&report))
}

pub fn simulate(cfg: &Resolved, out: &Path, n: usize) -> Result<()> {
    let target = cfg.target.build()?;
    let model = cfg.noise.build(cfg.dim())?;
    let sample = sample_model(&target, &model, n, cfg.seed)?;
    ensure_dir(out)?;
    let mut text = cfg.csv_banner("simulate");
    let header: Vec<String> = (1..=sample.dim()).map(|j| format!("z{j}")).collect();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in sample.rows() {
        let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write(&out.join("sample.csv"), &text)?;
    let meta = json!({ "config_hash": cfg.hash(), "seed": cfg.seed, "config": cfg, "n": n });
    write(&out.join("sample.json"), &json_text(&meta))
}

pub fn benchmark(cfg: &Resolved, out: &Path) -> Result<String> {
    let scenario = cfg.scenario();
    scenario.validate()?;
    let report = run_risk_experiment(&scenario)?;
    ensure_dir(out)?;
    let mut json = serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?;
    json["config_hash"] = json!(cfg.hash());
    json["seed"] = json!(cfg.seed);
    write(&out.join("report.json"), &json_text(&json))?;
    let mut risk = cfg.csv_banner("benchmark").into_bytes();
    report.write_csv(&mut risk)?;
    std::fs::write(out.join("risk.csv"), risk)?;
    let mut oracle = cfg.csv_banner("benchmark").into_bytes();
    report.write_oracle_csv(&mut oracle)?;
    std::fs::write(out.join("oracle.csv"), oracle)?;

    let mut table = String::new();
    writeln!(table, "{:>8} {:>14} {:>14} {:>10} {:>8}", "n", "selected", "oracle", "ratio", "oracle_k").ok();
    for o in &report.oracle {
        let sel_se = report
            .rows
            .iter()
            .find(|r| r.n == o.n && r.method == Method::Selected)
            .and_then(|r| r.std_error)
            .unwrap_or(f64::NAN);
        writeln!(
            table,
            "{:>8} {:>8.5}±{:<.4} {:>14.6} {:>10.3} {:>8}",
            o.n,
            o.selected_risk,
            sel_se,
            o.oracle_risk,
            o.ratio,
            o.oracle_k.iter().map(i32::to_string).collect::<Vec<_>>().join(";")
        )
        .ok();
    }
    if let Some(s) = &report.slope {
        writeln!(table, "slope vs ln n: {:.4} ± {:.4} ({} points)", s.slope, s.half_width, s.points).ok();
    }
    if let Some(r) = &report.rate {
        writeln!(table, "predicted δ_n exponent: {:.4} ({:?}), log power {:.3}", r.exponent, r.regime, r.log_power).ok();
    }
    if !report.failures.is_empty() {
        writeln!(table, "{} replicate(s) failed; see report.json", report.failures.len()).ok();
    }
    writeln!(table, "inequality audit: {} checks, {} violations", report.inequality.checked, report.inequality.violations).ok();
    Ok(table)
}

pub fn inspect_kernel(cfg: &Resolved, out: &Path, h: &[f64]) -> Result<()> {
    let d = cfg.dim();
    let h: Vec<f64> = match h.len() {
        1 => vec![h[0]; d],
        len if len == d => h.to_vec(),
        len => return Err(Error::InvalidInput(format!("--h has {len} entries for dimension {d}"))),
    };
    if h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("bandwidths must be positive".into()));
    }
    let model = cfg.noise.build(d)?;
    let kernel = KernelSpec::new(BaseKernel::from_name(&cfg.kernel)?, d);
    let consts = kernel_constants(&kernel, &model, cfg.p)?;
    let table = build_deconv_kernel_auto(&kernel, &model, &h, &SynthesisPlan::default())?;
    ensure_dir(out)?;
    table.save_dump(&out.join("kernel_table.bin"))?;
    if d == 1 {
        let mut text = cfg.csv_banner("inspect-kernel");
        text.push_str("y,m\n");
        for (i, v) in table.values().iter().enumerate() {
            writeln!(text, "{},{}", fmt17(table.node(i)[0]), fmt17(*v)).ok();
        }
        write(&out.join("kernel_table.csv"), &text)?;
    }
    let report = json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": cfg,
        "h": h,
        "kernel": cfg.kernel,
        "catalogue": BaseKernel::catalogue(),
        "constants": consts,
        "epsilon": model.epsilon(),
        "upsilon0": model.upsilon0(),
        "table": {
            "synthesis": format!("{:?}", table.synthesis()),
            "resolution": table.resolution(),
            "window_lo": table.window().lo,
            "window_hi": table.window().hi,
            "fourier_residual": table.fourier_residual(),
            "band_edge": table.band_edge(),
            "boundary_magnitude": table.boundary_magnitude(),
            "interpolation_error": table.interpolation_error(),
            "sup_abs": table.sup_abs(),
            "l2_norm": table.l2_norm(),
            "mass": table.mass(),
        },
    });
    write(&out.join("constants.json"), &json_text(&report))
}
