//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bwkde::densities::{continuity_modulus, make_witness_compact, make_witness_exponential, DEFAULT_SHIFT_GRID};
use bwkde::experiments::{execute, run, ExperimentConfig, RunOutput};
use bwkde::{catalog, DensityModel, Kernel, KernelPair, QuadratureSpec};
use nalgebra::{DMatrix, DVector};

type Outcome = Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn execute_named(name: &str) -> Result<RunOutput, String> {
    execute(&load(name), 1).map_err(|e| format!("{name}: {e}"))
}

fn within_time(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed <= limit {
        Ok(format!("{detail}; {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
    } else {
        Err(format!("{detail}; took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
    }
}

/// All `2(s+1)` moment conditions, with moments recomputed by adaptive quadrature.
fn construction_correctness() -> Outcome {
    let start = Instant::now();
    let spec = QuadratureSpec::with_tol(1e-12, 1e-12);
    let cases = [(Kernel::gaussian(), 1..=4), (Kernel::epanechnikov(), 1..=2)];
    let mut worst: f64 = 0.0;
    for (base, orders) in cases {
        for s in orders {
            let pair = KernelPair::construct(&base, s).map_err(|e| e.to_string())?;
            for j in 0..=s {
                let m0 = pair.k0.moment_by_quadrature(j, &spec).map_err(|e| e.to_string())?;
                let ms = pair.ks.moment_by_quadrature(j, &spec).map_err(|e| e.to_string())?;
                let r0 = (m0 - if j == 0 { 1.0 } else { 0.0 }).abs();
                let rs = (ms - if j == s { 1.0 } else { 0.0 }).abs();
                worst = worst.max(r0).max(rs);
            }
        }
    }
    let detail = format!("max residual {worst:.2e} (bound 1e-8)");
    if worst > 1e-8 {
        return Err(detail);
    }
    within_time(start.elapsed(), Duration::from_secs(10), detail)
}

/// Gaussian `s = 2` coefficients against a dense LU solve of the normal-moment Hankel system.
fn gaussian_coefficients() -> Outcome {
    let normal_moment = |m: usize| -> f64 {
        if m % 2 == 1 {
            0.0
        } else {
            (1..m).step_by(2).map(|k| k as f64).product()
        }
    };
    let a = DMatrix::from_fn(3, 3, |i, j| normal_moment(i + j));
    let lu = a.lu();
    let c0 = lu.solve(&DVector::from_vec(vec![1.0, 0.0, 0.0])).ok_or("oracle matrix singular")?;
    let c2 = lu.solve(&DVector::from_vec(vec![0.0, 0.0, 1.0])).ok_or("oracle matrix singular")?;
    let pair = KernelPair::construct(&Kernel::gaussian(), 2).map_err(|e| e.to_string())?;
    let expected = [(pair.k0.coeffs(), c0.as_slice(), [1.5, 0.0, -0.5]), (pair.ks.coeffs(), c2.as_slice(), [-0.5, 0.0, 0.5])];
    let mut worst: f64 = 0.0;
    for (got, oracle, closed) in expected {
        if got.len() != 3 {
            return Err(format!("expected 3 coefficients, got {got:?}"));
        }
        for i in 0..3 {
            worst = worst.max((got[i] - oracle[i]).abs()).max((got[i] - closed[i]).abs());
        }
    }
    let detail = format!("K0 {:?}, K2 {:?}, max deviation {worst:.2e} (bound 1e-10)", pair.k0.coeffs(), pair.ks.coeffs());
    if worst <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slope_window(name: &str, lo: f64, hi: f64) -> Outcome {
    let start = Instant::now();
    let out = execute_named(name)?;
    let bias = out.summary.bias_curve.ok_or("no bias curve in output")?;
    let rate = bias.slope.rate.ok_or_else(|| bias.slope.rate_error.unwrap_or_default())?;
    let detail = format!("slope {:.4} in [{lo}, {hi}], r² {:.5}", rate.slope, rate.r_squared);
    if !(rate.slope >= lo && rate.slope <= hi) {
        return Err(detail);
    }
    within_time(start.elapsed(), Duration::from_secs(120), detail)
}

fn scaled_bias_decrease() -> Outcome {
    let out = execute_named("theorem2_gaussian.toml")?;
    let check = out.summary.bias_curve.ok_or("no bias curve in output")?.scaled_bias;
    let detail = format!(
        "bias/h² = {:?}, strictly decreasing: {}, total decrease {:.1}%",
        check.ratios.iter().map(|r| format!("{r:.4e}")).collect::<Vec<_>>(),
        check.strictly_decreasing,
        100.0 * check.decrease
    );
    if check.strictly_decreasing && check.decrease >= 0.3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn modulus_refinement() -> Outcome {
    let out = execute_named("modulus_epanechnikov.toml")?;
    let report = out.modulus_bound.ok_or("no modulus-bound output")?;
    let detail = format!(
        "fitted a {:.4}, C {:.4}, ratios {:?}, violations {}",
        report.fitted_exponent,
        report.c,
        report.rows.iter().map(|r| format!("{:.4}", r.ratio)).collect::<Vec<_>>(),
        report.violations
    );
    if report.violations == 0 && report.rows.len() == 6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn variation_rate() -> Outcome {
    let start = Instant::now();
    let cfg = load("variation_gaussian.toml");
    let mc = cfg.monte_carlo.as_ref().ok_or("config lacks [monte_carlo]")?;
    if mc.n_grid != [250, 500, 1000, 2000, 4000] || mc.replications != 200 || mc.h != Some(0.3) {
        return Err("variation config does not match the required n grid, R and h".into());
    }
    let out = execute(&cfg, 1).map_err(|e| e.to_string())?;
    let check = out.summary.variation_curve.ok_or("no variation output")?;
    let rate = check.rate.ok_or_else(|| check.rate_error.unwrap_or_default())?;
    let detail = format!("slope {:.4} in [-0.6, -0.4], r² {:.5}", rate.slope, rate.r_squared);
    if !(rate.slope >= -0.6 && rate.slope <= -0.4) {
        return Err(detail);
    }
    within_time(start.elapsed(), Duration::from_secs(600), detail)
}

fn remark3_inequality() -> Outcome {
    let cfg = load("remark3_gaussian.toml");
    let mc = cfg.monte_carlo.as_ref().ok_or("config lacks [monte_carlo]")?;
    let hs = cfg.remark3.as_ref().map(|r| r.h_values.len()).unwrap_or(0);
    if mc.n_grid.len() != 3 || hs != 3 || mc.replications != 200 {
        return Err("remark3 config is not a 3×3 grid with R = 200".into());
    }
    let out = execute(&cfg, 1).map_err(|e| e.to_string())?;
    let report = out.remark3.ok_or("no remark3 output")?;
    let worst = report
        .rows
        .iter()
        .map(|r| (r.lhs - r.rhs) / (r.lhs_se.powi(2) + r.rhs_se.powi(2)).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let detail = format!(
        "{} cells, {} violations, largest (lhs − rhs)/se {worst:.2}, ∫f = {}",
        report.rows.len(),
        report.violations,
        report.density_mass
    );
    if report.violations == 0 && report.rows.len() == 9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn modulus_properties() -> Outcome {
    let spec = QuadratureSpec::with_tol(1e-15, 1e-11);
    let deltas: Vec<f64> = (0..20).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 19.0)).collect();
    let mut notes = Vec::new();
    for d in catalog() {
        let s = d.s_max();
        let omega = deltas
            .iter()
            .map(|&delta| continuity_modulus(&d, s, delta, DEFAULT_SHIFT_GRID, &spec))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("{}: {e}", d.name()))?;
        let norm = d.l1_norm_of_deriv(s, &spec).map_err(|e| e.to_string())?;
        let monotone = omega.windows(2).all(|w| w[1] >= w[0]);
        let bounded = omega.iter().all(|&w| w <= 2.0 * norm + 1e-6);
        let small = omega[0] <= 1e-3 * omega[19];
        if !(monotone && bounded && small) {
            return Err(format!(
                "{} (s = {s}): monotone {monotone}, bounded by 2‖f⁽ˢ⁾‖₁ {bounded}, ω(1e-4)/ω(1) = {:.3e}",
                d.name(),
                omega[0] / omega[19]
            ));
        }
        notes.push(format!("{} s={s} ω(1e-4)/ω(1)={:.2e}", d.name(), omega[0] / omega[19]));
    }
    Ok(notes.join(", "))
}

fn witnesses() -> Outcome {
    let trials = 10_000;
    let bump = DensityModel::bump();
    let s = 2;
    let c = bump.sup_norm_of_deriv(s + 1).map_err(|e| e.to_string())? * (1.0 + 1e-6);
    let delta = 2.5;
    let compact = make_witness_compact(&bump, s, 1.0, c, delta).map_err(|e| e.to_string())?;
    let n = bump.support().ok_or("bump has no support radius")?;
    let compact_closed = 2.0 * (n + 1.0) * (c + 1.0) + 2.0 / (delta - 1.0);
    let compact_check = compact.spot_check(&bump, trials, 11);

    let logistic = DensityModel::logistic();
    let mut exp_rows = Vec::new();
    for delta in [2.0, 4.0] {
        let w = make_witness_exponential(&logistic, 0, 1.0, delta).map_err(|e| e.to_string())?;
        let closed = 4.0 * 0.5f64.exp() + 2f64.powf(delta + 1.0) / (delta - 1.0);
        exp_rows.push((delta, w.integral_value, closed, w.spot_check(&logistic, trials, 12)));
    }

    let mut ok = compact_check.violations == 0
        && compact.integral_value.is_finite()
        && (compact.integral_value - compact_closed).abs() <= 1e-6;
    let mut detail = format!(
        "compact: ∫ = {:.9} vs {:.9}, {} violations / {trials}",
        compact.integral_value, compact_closed, compact_check.violations
    );
    for (delta, value, closed, check) in exp_rows {
        ok &= check.violations == 0 && value.is_finite() && (value - closed).abs() <= 1e-6;
        detail += &format!("; exponential δ={delta}: ∫ = {value:.9} vs {closed:.9}, {} violations", check.violations);
    }
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.expect("dir entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("read output"))
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let cfg = load("smoke.toml");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (label, threads) in [("a", 1), ("b", 1), ("c", 4)] {
        let dir = tmp.path().join(label);
        run(&cfg, Some(&dir), threads).map_err(|e| e.to_string())?;
        outputs.push(read_dir_sorted(&dir));
    }
    let names: Vec<&str> = outputs[0].iter().map(|f| f.0.as_str()).collect();
    if names.iter().filter(|n| n.ends_with(".csv")).count() < 3 {
        return Err(format!("expected three CSV tables, got {names:?}"));
    }
    if outputs[0] != outputs[1] {
        return Err("two single-threaded runs differ".into());
    }
    if outputs[0] != outputs[2] {
        return Err("1-thread and 4-thread runs differ".into());
    }
    Ok(format!("{} files byte-identical across 2 runs and thread counts 1 and 4", names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("construction correctness", construction_correctness),
        ("gaussian s=2 coefficients", gaussian_coefficients),
        ("baseline bias rate", || slope_window("fixed_order2_gaussian.toml", 1.9, 2.1)),
        ("bandwidth-dependent bias rate", || slope_window("theorem2_gaussian.toml", 2.7, 3.3)),
        ("scaled bias decrease", scaled_bias_decrease),
        ("modulus-scaled bias bound", modulus_refinement),
        ("variation rate", variation_rate),
        ("variation bound", remark3_inequality),
        ("continuity modulus properties", modulus_properties),
        ("Lipschitz witnesses", witnesses),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
