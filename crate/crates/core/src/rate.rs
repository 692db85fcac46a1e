//! Log–log least-squares fits of empirical convergence orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares fit of `log error = intercept + slope · log grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `(log grid, log error)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest absolute residual in log space.
    pub residual_max: f64,
    /// Grid values dropped before fitting (e.g. quadrature-noise guard).
    #[serde(default)]
    pub excluded: Vec<f64>,
}

/// Fits the slope of `log y` against `log x` for `(x, y)` pairs.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateReport> {
    if points.len() < 3 {
        return Err(Error::Input(format!("a rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Input(format!("log-log fit needs positive finite values, got ({x}, {y})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("rate fit needs at least two distinct grid values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let residual_max = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(RateReport { points: logs, slope, intercept, r_squared, residual_max, excluded: Vec::new() })
}

/// Like [`fit_rate`] but drops points whose error estimate exceeds `max_rel_err` of the value.
/// Input triples are `(x, y, y_error)`.
pub fn fit_rate_guarded(rows: &[(f64, f64, f64)], max_rel_err: f64) -> Result<RateReport> {
    let (kept, dropped): (Vec<_>, Vec<_>) = rows.iter().partition(|(_, y, e)| *e <= max_rel_err * y.abs());
    let pts: Vec<(f64, f64)> = kept.iter().map(|&&(x, y, _)| (x, y)).collect();
    let mut report = fit_rate(&pts)?;
    report.excluded = dropped.iter().map(|r| r.0).collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = (1..=6).map(|k| {
            let h = 0.5f64.powi(k);
            (h, 7.0 * h.powi(3))
        }).collect();
        let r = fit_rate(&pts).unwrap();
        assert!((r.slope - 3.0).abs() < 1e-12);
        assert!((r.intercept - 7f64.ln()).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!(r.residual_max < 1e-12);
    }

    #[test]
    fn constant_error_has_zero_slope() {
        let pts = [(0.5, 2.0), (0.25, 2.0), (0.125, 2.0)];
        let r = fit_rate(&pts).unwrap();
        assert!(r.slope.abs() < 1e-14);
        assert_eq!(r.r_squared, 1.0);
    }

    #[test]
    fn rejects_non_positive_and_short_inputs() {
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn guard_excludes_noisy_points() {
        let rows = [(0.5, 1.0, 0.0), (0.25, 0.25, 0.0), (0.125, 0.0625, 0.0), (0.0625, 1e-3, 5e-4)];
        let r = fit_rate_guarded(&rows, 0.1).unwrap();
        assert_eq!(r.excluded, vec![0.0625]);
        assert!((r.slope - 2.0).abs() < 1e-12);
    }
}
