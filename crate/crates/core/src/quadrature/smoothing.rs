//! The smoothed density `f ∗ S_h K` and the L1 bias `∫ |f ∗ S_h K − f|`.

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, ORDER_TOL};

use super::adaptive::{integrate, integrate_abs_fallible, Integral, QuadratureSpec, DEFAULT_SCAN};

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("bandwidth must be positive, got {h}")))
    }
}

/// Kernel kinks (without polynomial roots, which do not affect smoothness).
fn kernel_kinks(k: &Kernel) -> Vec<f64> {
    match k.support_radius() {
        Some(m) => {
            let mut v = vec![-m, m];
            if let crate::kernel::Profile::Tabulated(tab) = k.profile() {
                v.extend_from_slice(tab.nodes());
            }
            v
        }
        None => Vec::new(),
    }
}

fn smooth_inner(d: &DensityModel, k: &Kernel, kinks: &[f64], h: f64, x: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let rk = k.effective_radius();
    let rf = d.effective_radius();
    // x − ht ∈ [−rf, rf]  ⇔  t ∈ [(x − rf)/h, (x + rf)/h]
    let lo = (-rk).max((x - rf) / h);
    let hi = rk.min((x + rf) / h);
    if lo >= hi {
        return Ok(Integral { value: 0.0, error: 0.0, panels: 0, evaluations: 0 });
    }
    let mut bp: Vec<f64> = kinks.to_vec();
    bp.extend(d.breakpoints().iter().map(|b| (x - b) / h));
    integrate(|t| k.eval(t) * d.pdf(x - h * t), lo, hi, &bp, spec)
}

/// `(f ∗ S_h K)(x) = ∫ K(t) f(x − ht) dt`, integrated on the kernel's own scale.
pub fn smooth(d: &DensityModel, k: &Kernel, h: f64, x: f64, spec: &QuadratureSpec) -> Result<Integral> {
    check_bandwidth(h)?;
    smooth_inner(d, k, &kernel_kinks(k), h, x, spec)
}

/// `(f ∗ S_h K)(x) = ∫ (S_h K)(y) f(x − y) dy`, straight from the convolution definition.
pub fn smooth_direct(d: &DensityModel, k: &Kernel, h: f64, x: f64, spec: &QuadratureSpec) -> Result<Integral> {
    check_bandwidth(h)?;
    let ry = h * k.effective_radius();
    let rf = d.effective_radius();
    let lo = (-ry).max(x - rf);
    let hi = ry.min(x + rf);
    if lo >= hi {
        return Ok(Integral { value: 0.0, error: 0.0, panels: 0, evaluations: 0 });
    }
    let mut bp: Vec<f64> = kernel_kinks(k).iter().map(|t| h * t).collect();
    bp.extend(d.breakpoints().iter().map(|b| x - b));
    integrate(|y| k.scaled(h, y) * d.pdf(x - y), lo, hi, &bp, spec)
}

/// Outer integration range for `f ∗ S_h K − f`.
pub fn smoothing_radius(d: &DensityModel, k: &Kernel, h: f64) -> f64 {
    d.effective_radius() + h * k.effective_radius()
}

/// `∫ |f ∗ S_h K − f|` by nested quadrature; inner integrals use [`QuadratureSpec::inner`].
///
/// The reported error is the outer estimate plus the largest inner estimate times the
/// length of the outer range.
pub fn bias_l1(d: &DensityModel, k: &Kernel, h: f64, spec: &QuadratureSpec) -> Result<Integral> {
    check_bandwidth(h)?;
    let a0 = k.moment(0)?;
    if (a0 - 1.0).abs() > ORDER_TOL {
        return Err(Error::Input(format!("bias needs a kernel with α_0 = 1, got {a0}")));
    }
    let kinks = kernel_kinks(k);
    let inner = spec.inner();
    let r = smoothing_radius(d, k, h);
    let mut bp = Vec::new();
    for b in d.breakpoints() {
        bp.push(b);
        bp.extend(kinks.iter().map(|m| b + h * m));
    }
    let mut worst_inner: f64 = 0.0;
    let outer = integrate_abs_fallible(
        |x| {
            let s = smooth_inner(d, k, &kinks, h, x, &inner)?;
            worst_inner = worst_inner.max(s.error);
            Ok(s.value - d.pdf(x))
        },
        -r,
        r,
        &bp,
        DEFAULT_SCAN,
        spec,
    )?;
    Ok(Integral { error: outer.error + worst_inner * 2.0 * r, ..outer })
}
