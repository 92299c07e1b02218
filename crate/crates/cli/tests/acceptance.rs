//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p convdens-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use convdens::bandwidth_grid::{build_grid, GridMode, GridRange};
use convdens::estimator_bank::{build_surface, build_tables, SortedSample};
use convdens::kernel_lab::{build_deconv_kernel, build_deconv_kernel_auto, kernel_constants, BaseKernel, KernelSpec, SynthesisPlan, TableDump, TableWindow};
use convdens::model::{sample_model, FrequencyProbe, NoiseKind, NoiseModel, TargetSpec};
use convdens::risk_lab::{
    concentration_audit, quantile_probes, run_risk_experiment, theoretical_rate, unbiasedness_check, RateSpec, RiskReport, Scenario,
};
use convdens::selector::{audit_selection_inequality, select, InequalityAudit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("convdens-acceptance-{}", std::process::id())).join(name);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn laplace(alpha: f64) -> NoiseModel {
    let kind = if alpha == 0.0 { NoiseKind::None } else { NoiseKind::Laplace { scale: 1.0 } };
    let mut m = NoiseModel::new(alpha, kind, 1).expect("model");
    m.certify(&FrequencyProbe::for_band(2000.0, 1)).expect("certified");
    m
}

fn models() -> Vec<(&'static str, NoiseModel)> {
    vec![("alpha=0", laplace(0.0)), ("alpha=0.5", laplace(0.5)), ("alpha=1", laplace(1.0))]
}

fn bspline8() -> KernelSpec {
    KernelSpec::new(BaseKernel::BSpline { order: 8 }, 1)
}

fn binomial(m: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

/// `r`-th derivative of the order-`m` B-spline kernel on `[-1, 1]`, from the
/// truncated-power representation of the cardinal B-spline.
fn bspline_truncated_power(m: u32, u: f64, r: u32) -> f64 {
    let s = 0.5 * m as f64;
    let t = s * (u + 1.0);
    if !(0.0..=m as f64).contains(&t) {
        return 0.0;
    }
    let deg = (m - 1 - r) as i32;
    let mut acc = 0.0;
    for k in 0..=m {
        let x = t - k as f64;
        if x > 0.0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial(m, k) * x.powi(deg);
        }
    }
    s.powi(r as i32 + 1) * acc / factorial(m - 1 - r)
}

fn merge(a: InequalityAudit, b: InequalityAudit) -> InequalityAudit {
    InequalityAudit { checked: a.checked + b.checked, violations: a.violations + b.violations, min_margin: a.min_margin.min(b.min_margin) }
}

/// 1. Every synthesized table solves the operator equation on its band.
fn criterion_1() -> Outcome {
    let kernel = bspline8();
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut count = 0;
    for (_, model) in models() {
        let grid = build_grid(2000, 1, &model.gamma(), GridMode::Isotropic, GridRange::default()).expect("grid");
        for h in grid.members() {
            let start = Instant::now();
            let table = build_deconv_kernel_auto(&kernel, &model, h, &SynthesisPlan::default()).expect("table");
            slowest = slowest.max(start.elapsed().as_secs_f64());
            worst = worst.max(table.fourier_residual());
            count += 1;
        }
    }
    let mut model2 = NoiseModel::new(1.0, NoiseKind::Laplace { scale: 1.0 }, 2).expect("model");
    model2.certify(&FrequencyProbe::for_band(200.0, 2)).expect("certified");
    let k2 = KernelSpec::new(BaseKernel::BSpline { order: 8 }, 2);
    for h in [[1.0, 1.0], [0.5, 1.0], [(-1.0f64).exp(), (-1.0f64).exp()]] {
        let start = Instant::now();
        let table = build_deconv_kernel_auto(&k2, &model2, &h, &SynthesisPlan::default()).expect("2-D table");
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max(table.fourier_residual());
        count += 1;
    }
    outcome(
        worst <= 1e-8 && slowest < 1.0,
        format!("{count} tables, max relative residual {worst:.2e} (limit 1e-8), slowest build {slowest:.3}s"),
    )
}

/// 2. The CLI-dumped α=1 Laplace table equals K_h − K_h″.
fn criterion_2() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_convdens");
    let mut worst: f64 = 0.0;
    for k in [0, -1, -2] {
        let h = (k as f64).exp();
        let out = scratch(&format!("c2_{}", -k));
        let status = Command::new(exe)
            .args(["inspect-kernel", "--alpha", "1", "--noise", "laplace:1", "--kernel", "bspline8", "--h", &format!("{h:.17e}")])
            .arg("--out")
            .arg(&out)
            .status()
            .expect("run inspect-kernel");
        if !status.success() {
            return outcome(false, format!("inspect-kernel failed for h = e^{k}"));
        }
        let dump = TableDump::load(&out.join("kernel_table.bin")).expect("dump");
        let n = dump.resolution[0];
        let step = (dump.window.hi[0] - dump.window.lo[0]) / (n - 1) as f64;
        for (i, v) in dump.values.iter().enumerate() {
            let y = dump.window.lo[0] + i as f64 * step;
            let u = y / h;
            let oracle = bspline_truncated_power(8, u, 0) / h - bspline_truncated_power(8, u, 2) / h.powi(3);
            worst = worst.max((v - oracle).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max |M − (K_h − K_h″)| = {worst:.2e} over all window nodes, h ∈ {{1, e⁻¹, e⁻²}} (limit 1e-6)"))
}

/// 3. With α = 0 the pipeline is a plain kernel density estimator.
fn criterion_3() -> Outcome {
    let target = TargetSpec::standard_normal(1);
    let model = NoiseModel::direct(1);
    let sample = sample_model(&target, &model, 1000, 33).expect("sample");
    let sorted = SortedSample::new(&sample);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let cases = [
        (BaseKernel::Epanechnikov, Box::new(|u: f64| if u.abs() <= 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 }) as Box<dyn Fn(f64) -> f64>),
        (BaseKernel::BSpline { order: 8 }, Box::new(|u: f64| bspline_truncated_power(8, u, 0))),
    ];
    for (base, hand) in &cases {
        let kernel = KernelSpec::new(*base, 1);
        for _ in 0..500 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let h: f64 = rng.gen_range(-4.0f64..0.0).exp();
            let window = TableWindow::symmetric(&[4.0 * h]);
            let table = build_deconv_kernel(&kernel, &model, &[h], &window, &[64]).expect("analytic table");
            let pipeline = sorted.sums(&table, &[x]).0 / sample.n() as f64;
            let kde = sample.rows().map(|z| hand((z[0] - x) / h)).sum::<f64>() / (sample.n() as f64 * h);
            worst = worst.max((pipeline - kde).abs());
        }
    }
    outcome(worst <= 1e-12, format!("1000 random (x, h) queries (Epanechnikov and bspline8), max |pipeline − KDE| = {worst:.2e} (limit 1e-12)"))
}

/// 4. Zero violations of the selection inequality anywhere in the suite,
/// including a two-dimensional full-grid run.
fn criterion_4(audit: &mut InequalityAudit) -> Outcome {
    let target = TargetSpec::gaussian_mixture(vec![(0.5, vec![-1.0, 0.0], vec![0.6, 1.0]), (0.5, vec![1.0, 0.5], vec![0.6, 0.5])]).expect("target");
    let mut model = NoiseModel::new(1.0, NoiseKind::Laplace { scale: 0.5 }, 2).expect("model");
    model.certify(&FrequencyProbe::for_band(200.0, 2)).expect("certified");
    let kernel = KernelSpec::new(BaseKernel::BSpline { order: 8 }, 2);
    let consts = kernel_constants(&kernel, &model, 2.0).expect("constants");
    let sample = sample_model(&target, &model, 3000, 12).expect("sample");
    let grid = build_grid(3000, 2, &model.gamma(), GridMode::Full, GridRange { k_min: Some(-2), k_max: Some(1) }).expect("grid");
    let tables = build_tables(&kernel, &model, &grid, &SynthesisPlan::default()).expect("tables");
    let points: Vec<f64> = (0..15).flat_map(|i| (0..15).flat_map(move |j| [-2.5 + i as f64 / 3.0, -2.0 + j as f64 / 3.0])).collect();
    let surface = build_surface(&sample, &grid, &tables, &points, &consts, 2.0).expect("surface");
    *audit = merge(*audit, audit_selection_inequality(&surface, &select(&surface, false)));
    outcome(
        audit.violations == 0,
        format!("{} (x, h) checks across all runs, {} violations, min margin {:.3e}", audit.checked, audit.violations, audit.min_margin),
    )
}

/// 5. The Monte Carlo mean of f̂_h(x) matches (K_h ⋆ f)(x).
fn criterion_5() -> Outcome {
    let target = TargetSpec::standard_normal(1);
    let kernel = bspline8();
    let hs: Vec<Vec<f64>> = [0.0, -1.0, -2.0].iter().map(|k: &f64| vec![k.exp()]).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (name, model) in models() {
        let probes = quantile_probes(&target, &model, &[0.25, 0.5, 0.75]).expect("probes");
        let rows = unbiasedness_check(&target, &model, &kernel, &hs, &probes, 500, 200, 5150).expect(name);
        for r in rows {
            worst = worst.max(r.z.abs());
            count += 1;
        }
    }
    outcome(worst <= 3.0, format!("{count} (α, h, x) cells, 200 replicates of n = 500, max |mean − (K_h⋆f)(x)| / SE = {worst:.2} (limit 3)"))
}

/// 6. Exceedance frequencies of the concentration events.
fn criterion_6() -> Outcome {
    let target = TargetSpec::standard_normal(1);
    let kernel = bspline8();
    let n = 2000;
    let (mut xi, mut uh, mut u4) = (0.0f64, 0.0f64, 0.0f64);
    let mut cells = 0;
    for (name, model) in models() {
        let grid = build_grid(n, 1, &model.gamma(), GridMode::Isotropic, GridRange::default()).expect("grid");
        let probes = quantile_probes(&target, &model, &[0.25, 0.5, 0.75]).expect("probes");
        let audit = concentration_audit(&target, &model, &kernel, &grid, &probes, n, 500, 2.0, 606).expect(name);
        xi = xi.max(audit.max_xi());
        uh = uh.max(audit.max_u_hat());
        u4 = u4.max(audit.max_u());
        cells += audit.rows.len();
    }
    outcome(
        xi <= 0.01 && uh <= 0.01,
        format!(
            "{cells} (α, x, h) cells, 500 replicates, n = {n}: max P(|ξ| > U_n) = {xi:.3}, max P(Û > 3U_n) = {uh:.3} (limits 0.01); max P(U_n > 4Û) = {u4:.3}"
        ),
    )
}

fn load(name: &str) -> Scenario {
    Scenario::load(&root().join("scenarios").join(name)).expect("scenario file")
}

fn slope_line(report: &RiskReport) -> String {
    let s = report.slope.as_ref().expect("slope");
    let risks: Vec<String> = report.oracle.iter().map(|o| format!("{}:{:.4}", o.n, o.selected_risk)).collect();
    format!("slope {:.3} ± {:.3}, risks [{}]", s.slope, s.half_width, risks.join(", "))
}

/// 7. Slope of the direct-case risk against the dense-regime prediction.
fn criterion_7(direct: &RiskReport) -> Outcome {
    let spec = RateSpec::new(vec![2.0], vec![1.0], 0.0, vec![2.0], 4.0, GridMode::Isotropic).expect("rate");
    let (exponent, _) = theoretical_rate(&spec);
    let slope = direct.slope.as_ref().map_or(f64::NAN, |s| s.slope);
    outcome(
        (slope + exponent).abs() <= 0.12 && direct.failures.is_empty(),
        format!("{:?} regime predicts −{exponent:.3}; {}", spec.regime, slope_line(direct)),
    )
}

/// 8. Deconvolution flattens the slope.
fn criterion_8(direct: &RiskReport, deconv: &RiskReport) -> Outcome {
    let a0 = direct.slope.as_ref().map_or(f64::NAN, |s| s.slope);
    let a1 = deconv.slope.as_ref().map_or(f64::NAN, |s| s.slope);
    let hits: Vec<String> = deconv.oracle.iter().map(|o| format!("{:.2}", o.boundary_hit_rate)).collect();
    outcome(
        a1 - a0 >= 0.05,
        format!("α=1 {}; α=0 slope {a0:.3}; difference {:.3} (need ≥ 0.05); α=1 boundary-hit rates [{}]", slope_line(deconv), a1 - a0, hits.join(", ")),
    )
}

/// 9. Selected risk within 5× of the best fixed bandwidth.
fn criterion_9(direct: &RiskReport, mixed: &RiskReport) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r) in [("α=0", direct), ("α=0.5", mixed)] {
        let o = r.oracle_at(4096).expect("n = 4096 row");
        ok &= o.ratio <= 5.0 && r.failures.is_empty();
        parts.push(format!("{name}: selected {:.4} / oracle {:.4} (k = {:?}) = {:.3}", o.selected_risk, o.oracle_risk, o.oracle_k, o.ratio));
    }
    outcome(ok, format!("{} (limit 5)", parts.join("; ")))
}

/// 10. Byte-identical outputs for repeated runs of every command.
fn criterion_10() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_convdens");
    let smoke = root().join("scenarios/smoke.toml");
    let run = |tag: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let base = scratch(&format!("c10_{tag}"));
        let sim = base.join("sim");
        let invocations: Vec<Vec<String>> = vec![
            vec!["simulate".into(), "--n".into(), "800".into(), "--alpha".into(), "0.5".into(), "--noise".into(), "laplace".into(), "--seed".into(), "5".into()],
            vec!["estimate".into(), "--sample".into(), sim.join("sample.csv").display().to_string(), "--alpha".into(), "0.5".into(), "--noise".into(), "laplace".into(), "--diagnostics".into()],
            vec!["benchmark".into(), "--config".into(), smoke.display().to_string(), "--replicates".into(), "2".into()],
            vec!["inspect-kernel".into(), "--alpha".into(), "0.5".into(), "--noise".into(), "laplace".into(), "--h".into(), "0.5".into()],
        ];
        let dirs = ["sim", "est", "bench", "kernel"];
        let mut files = Vec::new();
        for (args, dir) in invocations.iter().zip(dirs) {
            let out = base.join(dir);
            let status = Command::new(exe).args(args).arg("--out").arg(&out).output().map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{dir}: {}", String::from_utf8_lossy(&status.stderr)));
            }
            let mut names: Vec<PathBuf> = std::fs::read_dir(&out).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
            names.sort();
            for p in names {
                files.push((format!("{dir}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
            }
        }
        Ok(files)
    };
    let scenario = load("smoke.toml");
    let core_a = run_risk_experiment(&Scenario { replicates: 1, ..scenario.clone() }).and_then(|r| r.to_json());
    let core_b = run_risk_experiment(&Scenario { replicates: 1, ..scenario }).and_then(|r| r.to_json());
    match (run("a"), run("b")) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
            let core_same = matches!((&core_a, &core_b), (Ok(x), Ok(y)) if x == y);
            outcome(
                differing.is_empty() && a.len() == b.len() && core_same,
                format!("{} output files compared across two CLI runs, {} differ {:?}; library report identical: {core_same}", a.len(), differing.len(), differing),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("command failed: {e}")),
    }
}

fn main() {
    let started = Instant::now();
    let mut audit = InequalityAudit { checked: 0, violations: 0, min_margin: f64::INFINITY };
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |id: u32, o: Outcome, t: Instant| {
        println!("criterion {id:>2}: {} — {} [{:.1}s]", if o.passed { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
        results.push((id, o));
    };

    let t = Instant::now();
    report(1, criterion_1(), t);
    let t = Instant::now();
    report(2, criterion_2(), t);
    let t = Instant::now();
    report(3, criterion_3(), t);

    let t = Instant::now();
    let direct = run_risk_experiment(&load("rate_direct.toml")).expect("direct rate scenario");
    let deconv = run_risk_experiment(&load("rate_deconvolution.toml")).expect("deconvolution rate scenario");
    let oracle_direct = run_risk_experiment(&load("oracle_direct.toml")).expect("direct oracle scenario");
    let oracle_mixed = run_risk_experiment(&load("oracle_mixed.toml")).expect("mixed oracle scenario");
    let experiments = t.elapsed().as_secs_f64();
    for r in [&direct, &deconv, &oracle_direct, &oracle_mixed] {
        audit = merge(audit, r.inequality);
    }

    let t = Instant::now();
    report(4, criterion_4(&mut audit), t);
    let t = Instant::now();
    report(5, criterion_5(), t);
    let t = Instant::now();
    report(6, criterion_6(), t);
    let t = Instant::now();
    report(7, criterion_7(&direct), t);
    report(8, criterion_8(&direct, &deconv), t);
    report(9, criterion_9(&oracle_direct, &oracle_mixed), t);
    let t = Instant::now();
    report(10, criterion_10(), t);

    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.passed).map(|(id, _)| *id).collect();
    println!(
        "acceptance: {}/{} passed ({experiments:.1}s in risk experiments, {:.1}s total)",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    let _ = std::fs::remove_dir_all(std::env::temp_dir().join(format!("convdens-acceptance-{}", std::process::id())));
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
