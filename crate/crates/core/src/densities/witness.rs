//! Witnesses `(l, r)` of the global Lipschitz condition
//! `|g(x − h) − g(x)| ≤ l(x)|h|ᵃ` for `|h| ≤ r(x)`, with `∫ (l + r^{−δ}) < ∞`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::DensityModel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};

/// How `l` and `r` are defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `g` supported in `[−N, N]` with a global Hölder constant `c`:
    /// `l = c, r = 1` for `|x| < N + 1`, and `l = 0, r = |x| − N` beyond.
    ///
    /// Taking `r = |x| − N` all the way down to `|x| = N` would make `r^{−δ}`
    /// non-integrable at the support edge for every `δ > 1`; inside the unit
    /// collar the Hölder bound itself holds with `l = c` and `r = 1`.
    Compact { support: f64, c: f64 },
    /// `|g′(t)| ≤ c e^{−|t|}`: `l = c e^{1/2 − |x|/2}`, `r = (1 + |x|)/2`, exponent 1.
    Exponential { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzWitness {
    pub kind: WitnessKind,
    /// Derivative order `s`; the witness is for `g = f⁽ˢ⁾`.
    pub s: usize,
    pub a: f64,
    pub delta: f64,
    /// `∫ (l(x) + r(x)^{−δ}) dx`, computed by quadrature.
    pub integral_value: f64,
}

/// Outcome of random spot checks of the Lipschitz inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotCheck {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `|g(x − h) − g(x)| / (l(x)|h|ᵃ)` over trials where the bound is positive.
    pub max_ratio: f64,
}

impl LipschitzWitness {
    pub fn l(&self, x: f64) -> f64 {
        match self.kind {
            WitnessKind::Compact { support, c } => {
                if x.abs() < support + 1.0 {
                    c
                } else {
                    0.0
                }
            }
            WitnessKind::Exponential { c } => c * (0.5 - 0.5 * x.abs()).exp(),
        }
    }

    pub fn r(&self, x: f64) -> f64 {
        match self.kind {
            WitnessKind::Compact { support, .. } => {
                if x.abs() < support + 1.0 {
                    1.0
                } else {
                    x.abs() - support
                }
            }
            WitnessKind::Exponential { .. } => 0.5 * (1.0 + x.abs()),
        }
    }

    /// Checks the inequality on `trials` random pairs: `x` uniform over a window around
    /// the interesting region, `h` uniform in `[−r(x), r(x)]`.
    pub fn spot_check(&self, d: &DensityModel, trials: usize, seed: u64) -> SpotCheck {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let window = match self.kind {
            WitnessKind::Compact { support, .. } => 3.0 * (support + 1.0),
            WitnessKind::Exponential { .. } => 20.0,
        };
        let g = |x: f64| d.deriv_unchecked(self.s, x);
        let mut violations = 0;
        let mut max_ratio: f64 = 0.0;
        for _ in 0..trials {
            let x = rng.random_range(-window..=window);
            let r = self.r(x);
            let h = rng.random_range(-r..=r);
            let (gx, gxh) = (g(x), g(x - h));
            let lhs = (gxh - gx).abs();
            let rhs = self.l(x) * h.abs().powf(self.a);
            let slack = 1e-12 * (gx.abs() + gxh.abs()) + 1e-300;
            if lhs > rhs + slack {
                violations += 1;
            }
            if rhs > 0.0 {
                max_ratio = max_ratio.max(lhs / rhs);
            }
        }
        SpotCheck { trials, violations, max_ratio }
    }
}

/// `∫_1^∞ u^{−δ} du` by quadrature after the substitution `u = eʸ`.
fn unit_power_tail(delta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let k = delta - 1.0;
    let end = 745.0 / k;
    Ok(integrate(|y| (-k * y).exp(), 0.0, end, &[1.0 / k, 5.0 / k, 40.0 / k], spec)?.value)
}

fn witness_spec() -> QuadratureSpec {
    QuadratureSpec::with_tol(1e-14, 1e-13)
}

fn check_common(d: &DensityModel, s: usize, a: f64, delta: f64) -> Result<()> {
    if s > d.s_max() {
        return Err(Error::Capability(format!("density '{}' has no derivative of order {s}", d.name())));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Input(format!("Lipschitz exponent must be in (0, 1], got {a}")));
    }
    if !(delta > 1.0 && delta.is_finite()) {
        return Err(Error::Input(format!("δ must be > 1, got {delta}")));
    }
    Ok(())
}

const CONSTRUCTION_TRIALS: usize = 2_000;

/// Witness for a compactly supported `f⁽ˢ⁾` satisfying `|g(x − h) − g(x)| ≤ c|h|ᵃ` everywhere.
/// The caller supplies `c`; it is spot-verified before the witness is returned.
pub fn make_witness_compact(d: &DensityModel, s: usize, a: f64, c: f64, delta: f64) -> Result<LipschitzWitness> {
    check_common(d, s, a, delta)?;
    let support = d
        .support()
        .ok_or_else(|| Error::Input(format!("density '{}' does not have compact support", d.name())))?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Input(format!("Lipschitz constant must be positive, got {c}")));
    }
    let spec = witness_spec();
    let collar = support + 1.0;
    let inner = integrate(|_| c + 1.0, -collar, collar, &[], &spec)?.value;
    // For |x| ≥ N + 1, r^{−δ} = (|x| − N)^{−δ}: two copies of the unit power tail.
    let integral_value = inner + 2.0 * unit_power_tail(delta, &spec)?;
    let w = LipschitzWitness { kind: WitnessKind::Compact { support, c }, s, a, delta, integral_value };
    let check = w.spot_check(d, CONSTRUCTION_TRIALS, 0x5eed_0001);
    if check.violations > 0 {
        return Err(Error::WitnessInvalid(format!(
            "{} of {} spot checks violate the Lipschitz bound (max ratio {:.4})",
            check.violations, check.trials, check.max_ratio
        )));
    }
    Ok(w)
}

/// Witness for `g = f⁽ˢ⁾` with `|g′(t)| ≤ c e^{−|t|}`; the bound is verified on a wide grid first.
pub fn make_witness_exponential(d: &DensityModel, s: usize, c: f64, delta: f64) -> Result<LipschitzWitness> {
    check_common(d, s, 1.0, delta)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Input(format!("derivative bound must be positive, got {c}")));
    }
    let r = d.effective_radius().min(60.0);
    let n = 24_000;
    for i in 0..=n {
        let t = -r + 2.0 * r * i as f64 / n as f64;
        let lhs = d.deriv_unchecked(s + 1, t).abs();
        let rhs = c * (-t.abs()).exp();
        if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::WitnessInvalid(format!(
                "|f^({})({t})| = {lhs:.6e} exceeds c·e^(−|t|) = {rhs:.6e}",
                s + 1
            )));
        }
    }
    let spec = witness_spec();
    // ∫ c e^{1/2 − |x|/2} dx, truncated where the integrand underflows.
    let l_part = 2.0 * integrate(|x| c * (0.5 - 0.5 * x).exp(), 0.0, 1500.0, &[2.0, 20.0, 100.0], &spec)?.value;
    // ∫ ((1 + |x|)/2)^{−δ} dx = 2·2^δ ∫_1^∞ u^{−δ} du
    let r_part = 2.0 * 2f64.powf(delta) * unit_power_tail(delta, &spec)?;
    let w = LipschitzWitness {
        kind: WitnessKind::Exponential { c },
        s,
        a: 1.0,
        delta,
        integral_value: l_part + r_part,
    };
    let check = w.spot_check(d, CONSTRUCTION_TRIALS, 0x5eed_0002);
    if check.violations > 0 {
        return Err(Error::WitnessInvalid(format!(
            "{} of {} spot checks violate the Lipschitz bound",
            check.violations, check.trials
        )));
    }
    Ok(w)
}
