//! Globally adaptive Gauss–Kronrod (10/21 point) integration on finite intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kronrod abscissae on [0, 1]; odd indices are the embedded Gauss nodes.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208977221413,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// How the real line is cut down to a finite interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Integrate over `[-r, r]`.
    Radius(f64),
    /// Let the caller's tail metadata choose, or probe the integrand's tails.
    TailBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub truncation: Truncation,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            truncation: Truncation::TailBound,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSpec { abs_tol, rel_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Input("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Input("max_subdivisions must be at least 1".into()));
        }
        if let Truncation::Radius(r) = self.truncation {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Input(format!("truncation radius must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Budget for an inner integral nested inside an outer one: tolerances shrink a hundredfold.
    pub fn inner(&self) -> QuadratureSpec {
        QuadratureSpec {
            abs_tol: self.abs_tol * 1e-2,
            rel_tol: self.rel_tol * 1e-2,
            ..*self
        }
    }
}

/// Value of an integral with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    splittable: bool,
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = checked(f, centre)?;
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = (fc * WGK[10]).abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = checked(f, centre - dx)?;
        let f2 = checked(f, centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

fn checked<F>(f: &mut F, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Input(format!("integrand is not finite at x = {x}")))
    }
}

/// Adaptive integration of a fallible integrand over `[a, b]`, with the interval
/// pre-split at `breakpoints` (points outside `(a, b)` are ignored).
///
/// Panels are bisected in order of largest error until the total error estimate
/// drops below `max(abs_tol, rel_tol·|value|)`. The final sum runs over panels in
/// left-to-right order.
pub fn integrate_fallible<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Input("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, panels: 0, evaluations: 0 });
    }
    if a > b {
        let r = integrate_fallible(f, b, a, breakpoints, spec)?;
        return Ok(Integral { value: -r.value, ..r });
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b && p.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut knots = Vec::with_capacity(cuts.len() + 2);
    knots.push(a);
    knots.extend(cuts);
    knots.push(b);

    let mut panels = Vec::with_capacity(knots.len() * 4);
    for w in knots.windows(2) {
        let (value, error) = gk21(&mut f, w[0], w[1])?;
        panels.push(Panel { a: w[0], b: w[1], value, error, splittable: true });
    }
    let mut evaluations = 21 * panels.len();

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::Accuracy { value: sorted_sum(&mut panels), error: total_err });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            // Every panel is at the resolution limit of f64.
            return Err(Error::Accuracy { value: sorted_sum(&mut panels), error: total_err });
        };
        let p = panels[i];
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) || (p.b - p.a) < 1e-14 * (1.0 + m.abs()) {
            panels[i].splittable = false;
            continue;
        }
        let (v1, e1) = gk21(&mut f, p.a, m)?;
        let (v2, e2) = gk21(&mut f, m, p.b)?;
        evaluations += 42;
        panels[i] = Panel { a: p.a, b: m, value: v1, error: e1, splittable: true };
        panels.push(Panel { a: m, b: p.b, value: v2, error: e2, splittable: true });
    }

    let error = panels.iter().map(|p| p.error).sum();
    let n = panels.len();
    Ok(Integral { value: sorted_sum(&mut panels), error, panels: n, evaluations })
}

fn sorted_sum(panels: &mut [Panel]) -> f64 {
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    panels.iter().map(|p| p.value).sum()
}

/// Adaptive integration of an infallible integrand over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    integrate_fallible(|x| Ok(f(x)), a, b, breakpoints, spec)
}

/// Sign changes of `f` on `[a, b]`: scans `scan` uniform points (plus the breakpoints)
/// and bisects every bracket. The returned crossings are sorted.
pub fn sign_changes<F>(f: &mut F, a: f64, b: f64, breakpoints: &[f64], scan: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut xs: Vec<f64> = (0..=scan.max(1))
        .map(|i| a + (b - a) * i as f64 / scan.max(1) as f64)
        .collect();
    xs.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut values = Vec::with_capacity(xs.len());
    for &x in &xs {
        values.push(checked(f, x)?);
    }
    let mut roots = Vec::new();
    for i in 1..xs.len() {
        let (mut lo, mut hi) = (xs[i - 1], xs[i]);
        let (mut flo, fhi) = (values[i - 1], values[i]);
        if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            let fm = checked(f, m)?;
            if fm == 0.0 {
                lo = m;
                hi = m;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = m;
                flo = fm;
            } else {
                hi = m;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    Ok(roots)
}

/// Number of scan points used to locate sign changes of L1 integrands.
pub const DEFAULT_SCAN: usize = 512;

/// `∫_a^b |f|`, splitting the interval at located sign changes of `f` so that
/// every panel integrates a smooth piece.
pub fn integrate_abs_fallible<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    scan: usize,
    spec: &QuadratureSpec,
) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut cuts = sign_changes(&mut f, a, b, breakpoints, scan)?;
    cuts.extend_from_slice(breakpoints);
    integrate_fallible(|x| f(x).map(f64::abs), a, b, &cuts, spec)
}

pub fn integrate_abs<F>(f: F, a: f64, b: f64, breakpoints: &[f64], spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    integrate_abs_fallible(|x| Ok(f(x)), a, b, breakpoints, DEFAULT_SCAN, spec)
}

/// Chooses a symmetric truncation radius for an integrand over the whole line.
pub fn truncation_radius<F>(f: &F, spec: &QuadratureSpec) -> f64
where
    F: Fn(f64) -> f64,
{
    match spec.truncation {
        Truncation::Radius(r) => r,
        Truncation::TailBound => {
            let negligible = |r: f64| {
                let tail = f(r).abs() + f(-r).abs() + f(2.0 * r).abs() + f(-2.0 * r).abs();
                tail * r < 1e-3 * spec.abs_tol
            };
            let mut r = 8.0;
            while r < 1e6 && !negligible(r) {
                r *= 2.0;
            }
            r
        }
    }
}

/// `∫ f` over the real line, truncated per `spec.truncation`.
pub fn integrate_line<F>(f: F, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    let r = truncation_radius(&f, spec);
    integrate(&f, -r, r, &[0.0], spec)
}

/// `∫ |f − g|` over the real line.
pub fn l1_distance<F, G>(f: F, g: G, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let diff = |x: f64| f(x) - g(x);
    let r = truncation_radius(&|x| f(x).abs() + g(x).abs(), spec);
    integrate_abs(diff, -r, r, &[0.0], spec)
}
