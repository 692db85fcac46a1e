//! Experiment orchestration: bias and variation curves, bound checks, rate fits and
//! persisted reports.
//!
//! A run reads an [`ExperimentConfig`], executes the listed experiments and writes
//! fixed-schema CSV tables plus `summary.json` into an output directory:
//!
//! | file | columns |
//! |------|---------|
//! | `bias_curve.csv` | `h,bias,quad_err` |
//! | `variation_curve.csv` | `n,h,mean_variation,std_err,R` |
//! | `remark3.csv` | `n,h,lhs,rhs,lhs_se,rhs_se` |
//! | `modulus_bound.csv` | `h,bias,omega,ratio` |
//!
//! Floats are written in their shortest round-trip form, so identical results give
//! byte-identical files. Random streams are described in [`seeds`].

mod config;
mod curves;
pub mod seeds;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    ExperimentConfig, ExperimentKind, Expectations, GridConfig, HCoupling, HGrid, KernelConfig, KernelMode,
    KernelSchedule, ModulusConfig, MonteCarloConfig, Remark3Config,
};
pub use curves::{
    bias_curve, modulus_bound, remark3_check, variation_bandwidth, variation_curve, Annotation, BiasCurve, BiasRow,
    McSummary, ModulusBoundReport, ModulusRow, ReferenceLattice, Remark3Report, Remark3Row, VariationCurve,
    VariationRow, RATE_GUARD,
};

use crate::error::{Error, Result};
use crate::rate::RateReport;

/// A fitted slope tested against an optional window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub rate: Option<RateReport>,
    pub rate_error: Option<String>,
    pub expected: Option<[f64; 2]>,
    pub pass: Option<bool>,
}

impl SlopeCheck {
    fn new(rate: Result<RateReport>, expected: Option<[f64; 2]>) -> SlopeCheck {
        match rate {
            Ok(r) => {
                let pass = expected.map(|[lo, hi]| r.slope >= lo && r.slope <= hi);
                SlopeCheck { rate: Some(r), rate_error: None, expected, pass }
            }
            Err(e) => SlopeCheck { rate: None, rate_error: Some(e.to_string()), expected, pass: expected.map(|_| false) },
        }
    }
}

/// `bias/hˢ` across the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledBiasCheck {
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
    /// `1 − last/first`.
    pub decrease: f64,
    pub expected_min_decrease: Option<f64>,
    pub pass: Option<bool>,
}

impl ScaledBiasCheck {
    pub fn new(ratios: Vec<f64>, expected_min_decrease: Option<f64>) -> ScaledBiasCheck {
        let strictly_decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
        let decrease = match (ratios.first(), ratios.last()) {
            (Some(&a), Some(&b)) if ratios.len() > 1 => 1.0 - b / a,
            _ => 0.0,
        };
        let pass = expected_min_decrease.map(|m| strictly_decreasing && decrease >= m);
        ScaledBiasCheck { ratios, strictly_decreasing, decrease, expected_min_decrease, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasSummary {
    pub slope: SlopeCheck,
    pub scaled_bias: ScaledBiasCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountCheck {
    pub count: usize,
    pub allowed: Option<usize>,
    pub pass: Option<bool>,
}

impl CountCheck {
    fn new(count: usize, allowed: Option<usize>) -> CountCheck {
        CountCheck { count, allowed, pass: allowed.map(|a| count <= a) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Remark3Summary {
    pub density_mass: f64,
    pub ks_abs_mass: f64,
    pub violations: CountCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusSummary {
    pub fitted_exponent: f64,
    pub a_exponent: Option<f64>,
    pub calibration_rows: usize,
    pub calibration_max: f64,
    pub safety_factor: f64,
    pub c: f64,
    pub violations: CountCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedInfo {
    pub master: u64,
    pub scheme: &'static str,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub seed: SeedInfo,
    pub bias_curve: Option<BiasSummary>,
    pub variation_curve: Option<SlopeCheck>,
    pub remark3: Option<Remark3Summary>,
    pub modulus_bound: Option<ModulusSummary>,
    pub annotations: Vec<Annotation>,
    /// Every declared expectation holds.
    pub pass: bool,
}

/// Everything a run computed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub bias_curve: Option<BiasCurve>,
    pub variation_curve: Option<VariationCurve>,
    pub remark3: Option<Remark3Report>,
    pub modulus_bound: Option<ModulusBoundReport>,
}

/// Executes the configured experiments without touching the file system.
pub fn execute(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let d = cfg.density_model()?;
    let schedule = cfg.schedule()?;
    let mut out = RunOutput {
        summary: RunSummary {
            config: cfg.clone(),
            seed: SeedInfo { master: cfg.seed, scheme: seeds::SCHEME },
            bias_curve: None,
            variation_curve: None,
            remark3: None,
            modulus_bound: None,
            annotations: Vec::new(),
            pass: true,
        },
        bias_curve: None,
        variation_curve: None,
        remark3: None,
        modulus_bound: None,
    };
    let expect = &cfg.expect;
    for kind in &cfg.experiments {
        match kind {
            ExperimentKind::BiasCurve => {
                let curve = bias_curve(&d, &schedule, &cfg.h_grid.values(), &cfg.quadrature);
                out.summary.annotations.extend(curve.annotations.iter().cloned());
                out.summary.bias_curve = Some(BiasSummary {
                    slope: SlopeCheck::new(curve.rate(), expect.bias_slope),
                    scaled_bias: ScaledBiasCheck::new(curve.scaled(cfg.kernel.s), expect.min_scaled_bias_decrease),
                });
                out.bias_curve = Some(curve);
            }
            ExperimentKind::VariationCurve => {
                let curve = variation_curve(cfg, threads)?;
                out.summary.annotations.extend(curve.annotations.iter().cloned());
                out.summary.variation_curve = Some(SlopeCheck::new(curve.rate(), expect.variation_slope));
                out.variation_curve = Some(curve);
            }
            ExperimentKind::Remark3 => {
                let report = remark3_check(cfg, threads)?;
                out.summary.annotations.extend(report.annotations.iter().cloned());
                out.summary.remark3 = Some(Remark3Summary {
                    density_mass: report.density_mass,
                    ks_abs_mass: report.ks_abs_mass,
                    violations: CountCheck::new(report.violations, expect.max_remark3_violations),
                });
                out.remark3 = Some(report);
            }
            ExperimentKind::ModulusBound => {
                let report = modulus_bound(cfg)?;
                out.summary.modulus_bound = Some(ModulusSummary {
                    fitted_exponent: report.fitted_exponent,
                    a_exponent: report.a_exponent,
                    calibration_rows: report.calibration_rows,
                    calibration_max: report.calibration_max,
                    safety_factor: report.safety_factor,
                    c: report.c,
                    violations: CountCheck::new(report.violations, expect.max_modulus_violations),
                });
                out.modulus_bound = Some(report);
            }
        }
    }
    let s = &out.summary;
    let flags = [
        s.bias_curve.as_ref().and_then(|b| b.slope.pass),
        s.bias_curve.as_ref().and_then(|b| b.scaled_bias.pass),
        s.variation_curve.as_ref().and_then(|v| v.pass),
        s.remark3.as_ref().and_then(|r| r.violations.pass),
        s.modulus_bound.as_ref().and_then(|m| m.violations.pass),
    ];
    out.summary.pass = flags.iter().all(|f| f.unwrap_or(true));
    Ok(out)
}

/// Shortest round-trip rendering used in every CSV.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn bias_csv(curve: &BiasCurve) -> String {
    let mut s = String::from("h,bias,quad_err\n");
    for r in &curve.rows {
        let _ = writeln!(s, "{},{},{}", num(r.h), num(r.bias), num(r.quad_err));
    }
    s
}

pub fn variation_csv(curve: &VariationCurve) -> String {
    let mut s = String::from("n,h,mean_variation,std_err,R\n");
    for r in &curve.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n, num(r.h), num(r.mean_variation), num(r.std_err), r.replications);
    }
    s
}

pub fn remark3_csv(report: &Remark3Report) -> String {
    let mut s = String::from("n,h,lhs,rhs,lhs_se,rhs_se\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.n, num(r.h), num(r.lhs), num(r.rhs), num(r.lhs_se), num(r.rhs_se));
    }
    s
}

pub fn modulus_csv(report: &ModulusBoundReport) -> String {
    let mut s = String::from("h,bias,omega,ratio\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{}", num(r.h), num(r.bias), num(r.omega), num(r.ratio));
    }
    s
}

/// Writes the CSV tables and `summary.json`; returns the paths written.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    if let Some(c) = &out.bias_curve {
        put("bias_curve.csv", bias_csv(c))?;
    }
    if let Some(c) = &out.variation_curve {
        put("variation_curve.csv", variation_csv(c))?;
    }
    if let Some(r) = &out.remark3 {
        put("remark3.csv", remark3_csv(r))?;
    }
    if let Some(r) = &out.modulus_bound {
        put("modulus_bound.csv", modulus_csv(r))?;
    }
    let json = serde_json::to_string_pretty(&out.summary).map_err(|e| Error::Io(e.to_string()))?;
    put("summary.json", json + "\n")?;
    Ok(files)
}

/// Executes `cfg` and persists the results. The output directory is `out_dir` when given,
/// otherwise the config's `output` entry.
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>, threads: usize) -> Result<RunOutput> {
    let dir = match (out_dir, &cfg.output) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => return Err(Error::Config("no output directory: pass one or set `output` in the config".into())),
    };
    let out = execute(cfg, threads)?;
    write_outputs(&out, &dir)?;
    Ok(out)
}

/// Reads a TOML config file and runs it.
pub fn run_file(path: &Path, out_dir: Option<&Path>, threads: usize) -> Result<RunOutput> {
    run(&ExperimentConfig::from_file(path)?, out_dir, threads)
}
