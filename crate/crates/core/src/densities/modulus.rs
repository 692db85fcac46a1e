//! L1 continuity modulus `ω(δ) = sup_{|t|≤δ} ∫ |g(x − t) − g(x)| dx` of `g = f⁽ˢ⁾`.

use super::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_abs_fallible, QuadratureSpec, DEFAULT_SCAN};
use crate::rate::fit_rate;

/// Number of positive shifts in `(0, δ]` examined by [`continuity_modulus`].
pub const DEFAULT_SHIFT_GRID: usize = 8;

/// `ω(δ)` for `f⁽ˢ⁾`, approximating the supremum by the shifts `±δk/grid_size`, `k = 1..=grid_size`.
pub fn continuity_modulus(
    d: &DensityModel,
    s: usize,
    delta: f64,
    grid_size: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if s > d.s_max() {
        return Err(Error::Capability(format!(
            "density '{}' has derivatives up to order {}, modulus asked for order {s}",
            d.name(),
            d.s_max()
        )));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Input(format!("modulus argument must be ≥ 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let grid = grid_size.max(1);
    let mut best: f64 = 0.0;
    for k in 1..=grid {
        let t = delta * k as f64 / grid as f64;
        for shift in [t, -t] {
            best = best.max(shift_distance(d, s, shift, spec)?);
        }
    }
    Ok(best)
}

/// `∫ |g(x − t) − g(x)| dx`.
fn shift_distance(d: &DensityModel, s: usize, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    let r = d.effective_radius() + t.abs();
    let mut bp = d.breakpoints();
    bp.extend(d.breakpoints().iter().map(|b| b + t));
    let v = integrate_abs_fallible(
        |x| Ok(d.deriv_unchecked(s, x - t) - d.deriv_unchecked(s, x)),
        -r,
        r,
        &bp,
        DEFAULT_SCAN * 2,
        spec,
    )?;
    Ok(v.value)
}

/// Least-squares exponent `a` in `ω(δ) ≈ C δᵃ` over the given δ values, returned with `C`.
pub fn fit_modulus_exponent(d: &DensityModel, s: usize, deltas: &[f64], spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let pts = deltas
        .iter()
        .map(|&delta| Ok((delta, continuity_modulus(d, s, delta, DEFAULT_SHIFT_GRID, spec)?)))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_rate(&pts)?;
    Ok((fit.slope, fit.intercept.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::catalog;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::with_tol(1e-15, 1e-11)
    }

    #[test]
    fn zero_shift_gives_zero() {
        assert_eq!(continuity_modulus(&DensityModel::gaussian(), 0, 0.0, 8, &spec()).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_small_delta_slope() {
        // ω(δ)/δ → ‖φ′‖₁ = 2φ(0) = √(2/π)
        let d = 1e-3;
        let w = continuity_modulus(&DensityModel::gaussian(), 0, d, 8, &spec()).unwrap();
        let limit = (2.0 / std::f64::consts::PI).sqrt();
        assert!((w / d / limit - 1.0).abs() < 0.01, "{}", w / d);
    }

    #[test]
    fn bounded_by_twice_the_l1_norm() {
        for d in catalog() {
            let s = d.s_max();
            let norm = d.l1_norm_of_deriv(s, &spec()).unwrap();
            for delta in [0.1, 1.0, 5.0] {
                let w = continuity_modulus(&d, s, delta, 8, &spec()).unwrap();
                assert!(w <= 2.0 * norm + 1e-6, "{} δ={delta}: {w} > 2·{norm}", d.name());
            }
        }
    }

    #[test]
    fn order_beyond_s_max_is_rejected() {
        let d = DensityModel::bump();
        assert!(matches!(continuity_modulus(&d, d.s_max() + 1, 0.1, 8, &spec()), Err(Error::Capability(_))));
        assert!(continuity_modulus(&d, 0, -1.0, 8, &spec()).is_err());
    }

    #[test]
    fn smooth_densities_have_unit_exponent() {
        let deltas: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k + 3)).collect();
        let (a, c) = fit_modulus_exponent(&DensityModel::gaussian(), 2, &deltas, &spec()).unwrap();
        assert!((a - 1.0).abs() < 0.02, "a = {a}");
        assert!(c > 0.0);
    }
}
