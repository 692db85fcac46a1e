//! Experiment orchestration: configs, curves, Monte Carlo consistency and persisted output.

use std::path::Path;

use bwkde::experiments::{
    bias_curve, execute, remark3_check, run, run_file, variation_curve, ExperimentConfig, KernelMode,
};
use bwkde::Error;

fn base_toml(extra: &str) -> String {
    format!(
        r#"
name = "test"
density = "gaussian"
seed = 11
experiments = ["bias-curve"]

[kernel]
base = "gaussian"
s = 2
mode = "bandwidth-dependent"

{extra}
"#
    )
}

fn mc_config(n_grid: &str, reps: usize, h: f64, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(&base_toml(&format!(
        "[monte_carlo]\nn_grid = {n_grid}\nreplications = {reps}\nh = {h}\n"
    )))
    .unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn unknown_names_are_config_errors_listing_alternatives() {
    let err = ExperimentConfig::from_toml(&base_toml("").replace("\"gaussian\"\nseed", "\"cauchy\"\nseed")).unwrap_err();
    match err {
        Error::Config(msg) => assert!(msg.contains("mixture") && msg.contains("logistic"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let err = ExperimentConfig::from_toml(&base_toml("").replace("base = \"gaussian\"", "base = \"cosine\"")).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("epanechnikov")), "{err:?}");
}

#[test]
fn missing_or_invalid_fields_are_config_errors() {
    let no_density = base_toml("").replace("density = \"gaussian\"\n", "");
    assert!(matches!(ExperimentConfig::from_toml(&no_density), Err(Error::Config(_))));
    for bad in [
        "[h_grid]\nstart = 0.5\nratio = 1.5\ncount = 4",
        "[h_grid]\nstart = 2.0\nratio = 0.5\ncount = 4",
        "[monte_carlo]\nn_grid = [100, 50]\nreplications = 10",
        "[monte_carlo]\nn_grid = [100]\nreplications = 0",
    ] {
        assert!(matches!(ExperimentConfig::from_toml(&base_toml(bad)), Err(Error::Config(_))), "{bad}");
    }
    let needs_mc = base_toml("").replace("[\"bias-curve\"]", "[\"variation-curve\"]");
    assert!(matches!(ExperimentConfig::from_toml(&needs_mc), Err(Error::Config(_))));
    let needs_family = base_toml("[monte_carlo]\nn_grid = [10]\nreplications = 2")
        .replace("[\"bias-curve\"]", "[\"remark3\"]")
        .replace("bandwidth-dependent", "fixed-order-s");
    assert!(matches!(ExperimentConfig::from_toml(&needs_family), Err(Error::Config(_))));
}

#[test]
fn bias_slopes_are_ordered_by_kernel_mode() {
    let mut cfg = ExperimentConfig::from_toml(&base_toml("")).unwrap();
    let d = cfg.density_model().unwrap();
    let hs = cfg.h_grid.values();
    let mut slopes = Vec::new();
    for mode in [KernelMode::K0Only, KernelMode::BandwidthDependent, KernelMode::FixedOrder] {
        cfg.kernel.mode = mode;
        let curve = bias_curve(&d, &cfg.schedule().unwrap(), &hs, &cfg.quadrature);
        assert!(curve.annotations.is_empty());
        slopes.push(curve.rate().unwrap().slope);
    }
    let (k0, kn, fixed) = (slopes[0], slopes[1], slopes[2]);
    assert!(k0 >= kn && kn >= fixed - 0.1, "{slopes:?}");
    assert!(kn >= 2.0 + 0.5, "{slopes:?}");
    assert!((k0 - 4.0).abs() < 0.2, "{slopes:?}");
}

#[test]
fn bundled_config_reproduces_the_cubic_bias_rate() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/theorem2_gaussian.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = run_file(&path, Some(tmp.path()), 1).unwrap();
    let slope = out.summary.bias_curve.as_ref().unwrap().slope.rate.as_ref().unwrap().slope;
    assert!((2.7..=3.3).contains(&slope), "{slope}");
    assert!(out.summary.pass);
    let csv = std::fs::read_to_string(tmp.path().join("bias_curve.csv")).unwrap();
    assert!(csv.starts_with("h,bias,quad_err\n0.5,"));
    assert_eq!(csv.lines().count(), 7);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 20240601);
    assert_eq!(summary["pass"], true);
}

#[test]
fn modulus_bound_rejects_a_fixed_order_kernel() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/modulus_epanechnikov.toml");
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    let good = execute(&cfg, 1).unwrap().modulus_bound.unwrap();
    assert_eq!(good.violations, 0);
    assert!((good.fitted_exponent - 1.0).abs() < 0.05);
    cfg.kernel.mode = KernelMode::FixedOrder;
    let bad = execute(&cfg, 1).unwrap().modulus_bound.unwrap();
    assert!(bad.violations > 0, "ratios {:?}", bad.rows);
}

#[test]
fn mean_variation_is_stable_when_replications_double() {
    let small = variation_curve(&mc_config("[100, 400]", 60, 0.4, 5), 1).unwrap();
    let large = variation_curve(&mc_config("[100, 400]", 120, 0.4, 5), 1).unwrap();
    for (a, b) in small.rows.iter().zip(&large.rows) {
        let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!((a.mean_variation - b.mean_variation).abs() <= 3.0 * se, "{a:?} vs {b:?}");
    }
}

#[test]
fn standard_error_halves_when_replications_quadruple() {
    let r1 = variation_curve(&mc_config("[100]", 100, 0.4, 8), 1).unwrap().rows[0].std_err;
    let r4 = variation_curve(&mc_config("[100]", 400, 0.4, 8), 1).unwrap().rows[0].std_err;
    let ratio = r4 / r1;
    assert!((ratio - 0.5).abs() <= 0.25 * 0.5, "SE ratio {ratio}");
}

#[test]
fn single_replication_of_a_single_point_is_positive() {
    let row = variation_curve(&mc_config("[1]", 1, 0.5, 1), 1).unwrap().rows[0].clone();
    assert!(row.mean_variation > 0.0 && row.mean_variation <= 2.0);
    assert!(row.std_err.is_nan());
}

#[test]
fn variation_bound_gap_closes_as_the_bandwidth_shrinks() {
    let mut cfg = mc_config("[200]", 40, 0.4, 3);
    cfg.remark3 = Some(bwkde::experiments::Remark3Config { h_values: vec![0.8, 0.4, 0.1] });
    let report = remark3_check(&cfg, 1).unwrap();
    assert_eq!(report.violations, 0);
    assert!((report.density_mass - 1.0).abs() < 1e-12);
    // rhs − lhs ≥ correction − |lhs − first term|, and the correction is 2h·∫|K_s|.
    let gaps: Vec<f64> =
        report.rows.iter().map(|r| r.rhs - 2.0 * r.h * report.ks_abs_mass - r.lhs).map(f64::abs).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    for (r, g) in report.rows.iter().zip(&gaps) {
        assert!(*g <= 2.0 * r.h * report.ks_abs_mass, "{r:?}");
    }
}

#[test]
fn runs_are_byte_identical_across_repeats_and_threads() {
    let cfg = mc_config("[50, 100]", 8, 0.5, 21);
    let mut cfg = cfg;
    cfg.experiments.push(bwkde::experiments::ExperimentKind::VariationCurve);
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for (label, threads) in [("one", 1), ("again", 1), ("four", 4)] {
        let dir = tmp.path().join(label);
        run(&cfg, Some(&dir), threads).unwrap();
        let read = |f: &str| std::fs::read(dir.join(f)).unwrap();
        seen.push((read("bias_curve.csv"), read("variation_curve.csv"), read("summary.json")));
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0], seen[2]);
}

#[test]
fn run_without_output_directory_is_a_config_error() {
    let cfg = ExperimentConfig::from_toml(&base_toml("")).unwrap();
    assert!(matches!(run(&cfg, None, 1), Err(Error::Config(_))));
}
