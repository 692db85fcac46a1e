//! Bias curves, Monte Carlo variation curves, the variation bound check and the
//! modulus-scaled bias check.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, KernelMode, KernelSchedule};
use super::seeds::{stream_rng, Purpose, StreamId};
use crate::densities::{continuity_modulus, fit_modulus_exponent, DensityModel, DEFAULT_SHIFT_GRID};
use crate::error::{Error, Result};
use crate::estimator::{trapezoid_with_bound, FittedEstimator, GridIntegral};
use crate::kernel::Kernel;
use crate::quadrature::{bias_l1, integrate, smooth, QuadratureSpec};
use crate::rate::{fit_rate_guarded, RateReport};

/// Points whose error estimate exceeds this fraction of the value are left out of rate fits.
pub const RATE_GUARD: f64 = 0.1;

/// A note attached to a row whose computation did not fully succeed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Annotation {
    pub experiment: &'static str,
    pub row: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    pub h: f64,
    pub bias: f64,
    pub quad_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub rows: Vec<BiasRow>,
    pub annotations: Vec<Annotation>,
}

impl BiasCurve {
    /// Slope of `log bias` against `log h`, skipping noisy or failed rows.
    pub fn rate(&self) -> Result<RateReport> {
        let pts: Vec<(f64, f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.h, r.bias, if r.bias.is_finite() { r.quad_err } else { f64::INFINITY }))
            .collect();
        fit_rate_guarded(&pts, RATE_GUARD)
    }

    /// `bias / hˢ` for every row.
    pub fn scaled(&self, s: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.bias / r.h.powi(s as i32)).collect()
    }
}

/// `∫|f ∗ S_h K − f|` at each `h`; failures become annotated rows.
pub fn bias_curve(d: &DensityModel, schedule: &KernelSchedule, hs: &[f64], spec: &QuadratureSpec) -> BiasCurve {
    let mut rows = Vec::with_capacity(hs.len());
    let mut annotations = Vec::new();
    for &h in hs {
        let outcome = schedule.at(h).and_then(|k| bias_l1(d, &k, h, spec));
        match outcome {
            Ok(v) => rows.push(BiasRow { h, bias: v.value, quad_err: v.error }),
            Err(e) => {
                let (bias, quad_err) = match e {
                    Error::Accuracy { value, error } => (value, error),
                    _ => (f64::NAN, f64::NAN),
                };
                rows.push(BiasRow { h, bias, quad_err });
                annotations.push(Annotation { experiment: "bias-curve", row: format!("h={h}"), message: e.to_string() });
            }
        }
    }
    BiasCurve { rows, annotations }
}

/// `f ∗ S_h K` tabulated on the lattice `k·step`, with on-demand evaluation beyond it.
pub struct ReferenceLattice {
    d: DensityModel,
    kernel: Kernel,
    h: f64,
    step: f64,
    k_min: i64,
    values: Vec<f64>,
    spec: QuadratureSpec,
}

impl ReferenceLattice {
    /// Tabulates over the radius outside which the density has mass below `tail_mass`,
    /// widened by the kernel's reach.
    pub fn new(d: &DensityModel, kernel: &Kernel, h: f64, step: f64, tail_mass: f64, spec: &QuadratureSpec) -> Result<Self> {
        let radius = d.tail_radius(tail_mass) + h * kernel.effective_radius();
        let k_max = (radius / step).ceil() as i64;
        let k_min = -k_max;
        let values = (k_min..=k_max)
            .map(|k| Ok(smooth(d, kernel, h, k as f64 * step, spec)?.value))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReferenceLattice { d: d.clone(), kernel: kernel.clone(), h, step, k_min, values, spec: *spec })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Index range `[k_min, k_max]` of the tabulated part.
    pub fn tabulated(&self) -> (i64, i64) {
        (self.k_min, self.k_min + self.values.len() as i64 - 1)
    }

    pub fn value(&self, k: i64) -> Result<f64> {
        let i = k - self.k_min;
        if i >= 0 && (i as usize) < self.values.len() {
            Ok(self.values[i as usize])
        } else {
            Ok(smooth(&self.d, &self.kernel, self.h, k as f64 * self.step, &self.spec)?.value)
        }
    }

    /// `∫|f̂ − f ∗ S_h K|` by the trapezoid rule on lattice nodes covering both the tabulated
    /// range and the estimator's reach. Fails when the halved-grid bound exceeds `rel_tol`.
    pub fn variation(&self, e: &FittedEstimator, rel_tol: f64) -> Result<GridIntegral> {
        let (t_lo, t_hi) = self.tabulated();
        let (e_lo, e_hi) = e.effective_range();
        let mut lo = t_lo.min((e_lo / self.step).floor() as i64);
        let hi = t_hi.max((e_hi / self.step).ceil() as i64);
        if (hi - lo) % 2 == 1 {
            lo -= 1;
        }
        let diffs = (lo..=hi)
            .map(|k| Ok((e.estimate(k as f64 * self.step) - self.value(k)?).abs()))
            .collect::<Result<Vec<_>>>()?;
        let out = trapezoid_with_bound(&diffs, self.step);
        if out.error_bound > rel_tol * out.value {
            return Err(Error::Accuracy { value: out.value, error: out.error_bound });
        }
        Ok(out)
    }
}

/// Mean and standard error of replicate values, summed in index order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub std_err: f64,
    pub replications: usize,
}

impl McSummary {
    pub fn of(values: &[f64]) -> McSummary {
        let r = values.len();
        let mean = values.iter().sum::<f64>() / r as f64;
        let std_err = if r > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (r as f64 - 1.0)).sqrt() / (r as f64).sqrt()
        } else {
            f64::NAN
        };
        McSummary { mean, std_err, replications: r }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

fn grid_step(cfg: &ExperimentConfig, h: f64) -> f64 {
    cfg.grid.step_fraction * h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationRow {
    pub n: usize,
    pub h: f64,
    pub mean_variation: f64,
    pub std_err: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationCurve {
    pub rows: Vec<VariationRow>,
    pub annotations: Vec<Annotation>,
}

impl VariationCurve {
    /// Slope of `log mean variation` against `log n`.
    pub fn rate(&self) -> Result<RateReport> {
        let pts: Vec<(f64, f64, f64)> = self
            .rows
            .iter()
            .map(|r| {
                let err = if r.mean_variation.is_finite() && r.std_err.is_finite() { r.std_err } else { f64::INFINITY };
                (r.n as f64, r.mean_variation, err)
            })
            .collect();
        fit_rate_guarded(&pts, RATE_GUARD)
    }
}

/// Bandwidth used by the variation curve at sample size `n`.
pub fn variation_bandwidth(cfg: &ExperimentConfig, n: usize) -> Result<f64> {
    let mc = cfg.monte_carlo.as_ref().ok_or_else(|| Error::Config("missing [monte_carlo] section".into()))?;
    let h = match &mc.h_coupling {
        Some(c) => c.scale * (n as f64).powf(-c.exponent),
        None => mc.h.unwrap_or(cfg.h_grid.start),
    };
    if h > 0.0 && h <= 1.0 {
        Ok(h)
    } else {
        Err(Error::Config(format!("bandwidth {h} for n = {n} is outside (0, 1]")))
    }
}

/// Monte Carlo estimate of `E∫|f̂_n − f ∗ S_h K|` for each `n` of the Monte Carlo grid.
pub fn variation_curve(cfg: &ExperimentConfig, threads: usize) -> Result<VariationCurve> {
    let d = cfg.density_model()?;
    let schedule = cfg.schedule()?;
    let mc = cfg.monte_carlo.as_ref().ok_or_else(|| Error::Config("missing [monte_carlo] section".into()))?;
    let pool = thread_pool(threads)?;
    let mut rows = Vec::new();
    let mut annotations = Vec::new();
    let mut lattice: Option<ReferenceLattice> = None;
    for (n_index, &n) in mc.n_grid.iter().enumerate() {
        let h = variation_bandwidth(cfg, n)?;
        let kernel = schedule.at(h)?;
        if lattice.as_ref().map(|l| l.h) != Some(h) {
            lattice = Some(ReferenceLattice::new(&d, &kernel, h, grid_step(cfg, h), cfg.grid.tail_mass, &cfg.quadrature)?);
        }
        let reference = lattice.as_ref().expect("lattice was just built");
        let results: Vec<Result<f64>> = pool.install(|| {
            (0..mc.replications)
                .into_par_iter()
                .map(|rep| {
                    let id = StreamId { purpose: Purpose::Variation, n_index, h_index: 0, replication: rep };
                    let mut rng = stream_rng(cfg.seed, id)?;
                    let e = FittedEstimator::fit(d.sample_with(&mut rng, n), kernel.clone(), h)?;
                    Ok(reference.variation(&e, cfg.grid.rel_tol)?.value)
                })
                .collect()
        });
        match results.into_iter().collect::<Result<Vec<f64>>>() {
            Ok(values) => {
                let s = McSummary::of(&values);
                rows.push(VariationRow { n, h, mean_variation: s.mean, std_err: s.std_err, replications: s.replications });
            }
            Err(e) => {
                annotations.push(Annotation { experiment: "variation-curve", row: format!("n={n}"), message: e.to_string() });
                rows.push(VariationRow { n, h, mean_variation: f64::NAN, std_err: f64::NAN, replications: mc.replications });
            }
        }
    }
    Ok(VariationCurve { rows, annotations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Remark3Row {
    pub n: usize,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
}

impl Remark3Row {
    /// `LHS − RHS` beyond two combined standard errors.
    pub fn is_violation(&self) -> bool {
        let se = (self.lhs_se.powi(2) + self.rhs_se.powi(2)).sqrt();
        !(self.lhs - self.rhs <= 2.0 * se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Remark3Report {
    pub rows: Vec<Remark3Row>,
    /// `∫f` by quadrature; enters the bound's correction term.
    pub density_mass: f64,
    /// `∫|K₍ₛ₎|`.
    pub ks_abs_mass: f64,
    pub violations: usize,
    pub annotations: Vec<Annotation>,
}

/// Compares `E∫|f̂_n − f ∗ S_h K_n|` with `E∫|f̂_n⁽⁰⁾ − f ∗ S_h K₍₀₎| + 2hᵃ ∫f ∫|K₍ₛ₎|`
/// for each `(n, h)`. Both estimators use the same samples in each replication.
pub fn remark3_check(cfg: &ExperimentConfig, threads: usize) -> Result<Remark3Report> {
    let d = cfg.density_model()?;
    let schedule = cfg.schedule()?;
    let mc = cfg.monte_carlo.as_ref().ok_or_else(|| Error::Config("missing [monte_carlo] section".into()))?;
    let hs: Vec<f64> = match &cfg.remark3 {
        Some(r) => r.h_values.clone(),
        None => cfg.h_grid.values(),
    };
    let pool = thread_pool(threads)?;
    let pair = schedule.pair();
    let r = d.effective_radius();
    let density_mass = integrate(|x| d.pdf(x), -r, r, &d.breakpoints(), &cfg.quadrature)?.value;
    let ks_abs_mass = pair.ks.abs_moment(0.0, 1e-12)?;
    let mut rows = Vec::new();
    let mut annotations = Vec::new();
    for (h_index, &h) in hs.iter().enumerate() {
        let kn = schedule.family.at(h)?;
        let k0 = pair.k0.clone();
        let step = grid_step(cfg, h);
        let ref_n = ReferenceLattice::new(&d, &kn, h, step, cfg.grid.tail_mass, &cfg.quadrature)?;
        let ref_0 = ReferenceLattice::new(&d, &k0, h, step, cfg.grid.tail_mass, &cfg.quadrature)?;
        let correction = 2.0 * schedule.family.weight(h) * density_mass * ks_abs_mass;
        for (n_index, &n) in mc.n_grid.iter().enumerate() {
            let results: Vec<Result<(f64, f64)>> = pool.install(|| {
                (0..mc.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let id = StreamId { purpose: Purpose::Remark3, n_index, h_index, replication: rep };
                        let mut rng = stream_rng(cfg.seed, id)?;
                        let samples = d.sample_with(&mut rng, n);
                        let en = FittedEstimator::fit(samples.clone(), kn.clone(), h)?;
                        let e0 = FittedEstimator::fit(samples, k0.clone(), h)?;
                        let vn = ref_n.variation(&en, cfg.grid.rel_tol)?.value;
                        let v0 = ref_0.variation(&e0, cfg.grid.rel_tol)?.value;
                        Ok((vn, v0))
                    })
                    .collect()
            });
            match results.into_iter().collect::<Result<Vec<_>>>() {
                Ok(pairs) => {
                    let lhs = McSummary::of(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
                    let first = McSummary::of(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
                    rows.push(Remark3Row {
                        n,
                        h,
                        lhs: lhs.mean,
                        rhs: first.mean + correction,
                        lhs_se: lhs.std_err,
                        rhs_se: first.std_err,
                    });
                }
                Err(e) => {
                    annotations.push(Annotation { experiment: "remark3", row: format!("n={n},h={h}"), message: e.to_string() });
                    rows.push(Remark3Row { n, h, lhs: f64::NAN, rhs: f64::NAN, lhs_se: f64::NAN, rhs_se: f64::NAN });
                }
            }
        }
    }
    let violations = rows.iter().filter(|r| r.is_violation()).count();
    Ok(Remark3Report { rows, density_mass, ks_abs_mass, violations, annotations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusRow {
    pub h: f64,
    pub bias: f64,
    /// `ω(hM)` of `f⁽ˢ⁾`.
    pub omega: f64,
    /// `bias / (hˢ ω(hM))`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusBoundReport {
    /// Least-squares exponent of `ω(δ) ≈ C δᵃ` over the `hM` grid.
    pub fitted_exponent: f64,
    /// Exponent of the weight `hᵃ` used in bandwidth-dependent mode (the fitted one,
    /// clipped to `(0, 1]`); `None` for the other kernel modes.
    pub a_exponent: Option<f64>,
    /// Number of largest-`h` rows used to fit the constant.
    pub calibration_rows: usize,
    /// Largest ratio over the calibration rows.
    pub calibration_max: f64,
    pub safety_factor: f64,
    /// `safety_factor · calibration_max`.
    pub c: f64,
    pub rows: Vec<ModulusRow>,
    /// Rows with `bias / hˢ > C ω(hM)`.
    pub violations: usize,
}

/// Checks `bias/hˢ ≤ C·ω(hM)` with the weight exponent matched to the density's modulus.
///
/// `C` is the safety factor times the largest ratio over the larger-`h` half of the grid, so
/// the smaller-`h` rows are an out-of-sample check. In bandwidth-dependent mode the weight
/// exponent is replaced by the fitted modulus exponent; the other modes use their own kernel.
pub fn modulus_bound(cfg: &ExperimentConfig) -> Result<ModulusBoundReport> {
    let d = cfg.density_model()?;
    let base = cfg.schedule()?;
    let s = cfg.kernel.s;
    let m = base
        .pair()
        .k0
        .support_radius()
        .ok_or_else(|| Error::Config("modulus-bound needs a compactly supported base kernel".into()))?;
    let hs = cfg.h_grid.values();
    if hs.len() < 3 {
        return Err(Error::Config("modulus-bound needs an h grid of at least 3 values".into()));
    }
    let deltas: Vec<f64> = hs.iter().map(|h| h * m).collect();
    let (fitted_exponent, _) = fit_modulus_exponent(&d, s, &deltas, &cfg.quadrature)?;
    let (schedule, a_exponent) = if base.mode == KernelMode::BandwidthDependent {
        let a = fitted_exponent.clamp(f64::MIN_POSITIVE, 1.0);
        (base.with_exponent(a)?, Some(a))
    } else {
        (base, None)
    };
    let mut rows = Vec::with_capacity(hs.len());
    for &h in &hs {
        let k = schedule.at(h)?;
        let bias = bias_l1(&d, &k, h, &cfg.quadrature)?.value;
        let omega = continuity_modulus(&d, s, h * m, DEFAULT_SHIFT_GRID, &cfg.quadrature)?;
        rows.push(ModulusRow { h, bias, omega, ratio: bias / (h.powi(s as i32) * omega) });
    }
    let calibration_rows = hs.len().div_ceil(2);
    let calibration_max = rows[..calibration_rows].iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let safety_factor = cfg.modulus.safety_factor;
    let c = safety_factor * calibration_max;
    let violations = rows.iter().filter(|r| !(r.ratio <= c)).count();
    Ok(ModulusBoundReport { fitted_exponent, a_exponent, calibration_rows, calibration_max, safety_factor, c, rows, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc_summary_matches_hand_computation() {
        let s = McSummary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_err - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert!(McSummary::of(&[1.0]).std_err.is_nan());
    }

    #[test]
    fn violation_rule_uses_combined_errors() {
        let row = |lhs: f64| Remark3Row { n: 10, h: 0.5, lhs, rhs: 1.0, lhs_se: 0.3, rhs_se: 0.4 };
        assert!(!row(1.99).is_violation());
        assert!(row(2.01).is_violation());
    }
}
