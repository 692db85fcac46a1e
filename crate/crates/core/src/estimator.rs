//! The kernel density estimator `f̂(x) = (1/n) Σ_j (S_h K)(x − X_j)` and grid L1 errors.

use crate::error::{Error, Result};
use crate::kernel::{Kernel, ORDER_TOL};

/// Uniform evaluation grid over `[lo, hi]` with an even number of intervals, so that the
/// every-other-node subgrid gives a coarser comparison rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    /// Requested spacing; the actual spacing is the largest value ≤ this that divides the range evenly.
    pub step: f64,
    /// Fail when the resolution error bound exceeds this fraction of the value.
    pub rel_tol: Option<f64>,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<GridSpec> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Input(format!("grid range [{lo}, {hi}] is empty or not finite")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Input(format!("grid step must be positive, got {step}")));
        }
        Ok(GridSpec { lo, hi, step, rel_tol: None })
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = Some(tol);
        self
    }

    /// Number of intervals (always even, at least 2).
    pub fn intervals(&self) -> usize {
        let n = ((self.hi - self.lo) / self.step).ceil() as usize;
        (n.max(2) + 1) & !1
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.intervals() as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let m = self.intervals();
        let dx = self.spacing();
        (0..=m).map(|i| if i == m { self.hi } else { self.lo + dx * i as f64 }).collect()
    }
}

/// A grid integral with its resolution error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridIntegral {
    pub value: f64,
    /// `|T(Δ) − T(2Δ)|` for the composite trapezoid rule `T`.
    pub error_bound: f64,
}

/// Trapezoid rule on uniformly spaced values (even interval count), with the halved-grid bound.
pub fn trapezoid_with_bound(values: &[f64], spacing: f64) -> GridIntegral {
    let m = values.len() - 1;
    let fine = spacing * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[m]));
    let coarse_sum: f64 = values.iter().step_by(2).sum();
    let coarse = 2.0 * spacing * (coarse_sum - 0.5 * (values[0] + values[m]));
    GridIntegral { value: fine, error_bound: (fine - coarse).abs() }
}

/// A fitted estimator. Evaluation is lazy; the sum runs over samples in index order.
/// With a higher-order kernel the estimate can be negative; it is never clipped.
#[derive(Debug, Clone)]
pub struct FittedEstimator {
    samples: Vec<f64>,
    kernel: Kernel,
    h: f64,
}

impl FittedEstimator {
    /// Checks `α_0(kernel) = 1` within the default order tolerance.
    pub fn fit(samples: Vec<f64>, kernel: Kernel, h: f64) -> Result<FittedEstimator> {
        let a0 = kernel.moment(0)?;
        if (a0 - 1.0).abs() > ORDER_TOL {
            return Err(Error::Input(format!("estimator kernel must integrate to 1, got α_0 = {a0}")));
        }
        FittedEstimator::fit_unnormalised(samples, kernel, h)
    }

    /// Like [`FittedEstimator::fit`] without the unit-mass check, for pseudo-kernels such as `K₍ₛ₎`.
    pub fn fit_unnormalised(samples: Vec<f64>, kernel: Kernel, h: f64) -> Result<FittedEstimator> {
        if samples.is_empty() {
            return Err(Error::Input("estimator needs at least one sample".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("samples must be finite".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
        }
        Ok(FittedEstimator { samples, kernel, h })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn estimate(&self, x: f64) -> f64 {
        let inv_h = 1.0 / self.h;
        let sum: f64 = self.samples.iter().map(|&xj| self.kernel.eval((x - xj) * inv_h)).sum();
        sum * inv_h / self.samples.len() as f64
    }

    pub fn try_estimate(&self, x: f64) -> Result<f64> {
        if x.is_finite() {
            Ok(self.estimate(x))
        } else {
            Err(Error::Input(format!("evaluation point must be finite, got {x}")))
        }
    }

    pub fn estimate_on(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.estimate(x)).collect()
    }

    /// Range outside which every summand is negligible.
    pub fn effective_range(&self) -> (f64, f64) {
        let r = self.h * self.kernel.effective_radius();
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - r, hi + r)
    }

    /// `∫ |estimate − reference|` by the composite trapezoid rule on a fixed grid.
    pub fn l1_error_grid<F: Fn(f64) -> f64>(&self, reference: F, grid: &GridSpec) -> Result<GridIntegral> {
        let nodes = grid.nodes();
        let refs: Vec<f64> = nodes.iter().map(|&x| reference(x)).collect();
        self.l1_error_values(grid, &refs)
    }

    /// As [`FittedEstimator::l1_error_grid`] with the reference already tabulated on `grid.nodes()`.
    pub fn l1_error_values(&self, grid: &GridSpec, reference: &[f64]) -> Result<GridIntegral> {
        let nodes = grid.nodes();
        if reference.len() != nodes.len() {
            return Err(Error::Input(format!(
                "reference has {} values for a grid of {} nodes",
                reference.len(),
                nodes.len()
            )));
        }
        let diffs: Vec<f64> = nodes.iter().zip(reference).map(|(&x, &r)| (self.estimate(x) - r).abs()).collect();
        let out = trapezoid_with_bound(&diffs, grid.spacing());
        if let Some(tol) = grid.rel_tol {
            if out.error_bound > tol * out.value {
                return Err(Error::Accuracy { value: out.value, error: out.error_bound });
            }
        }
        Ok(out)
    }
}
