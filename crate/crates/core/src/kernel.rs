//! Kernels of the form `(Σ a_i tⁱ) · p(t)` over a named base profile `p`, and their moments.
//!
//! Signed moments `α_j = ∫ tʲ K(t) dt` are closed-form for every profile, since
//! `α_j(K) = Σ a_i μ_{i+j}(p)` with `μ_m` the raw profile moments. Absolute moments
//! `β_s = ∫ |t|ˢ |K(t)| dt` are integrated numerically, splitting at the real roots
//! of the polynomial factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;
use crate::quadrature::{integrate, integrate_abs, QuadratureSpec};

/// Default tolerance for treating a moment as zero.
pub const ORDER_TOL: f64 = 1e-7;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this radius the Gaussian profile underflows to exactly zero in f64.
const GAUSSIAN_UNDERFLOW_RADIUS: f64 = 40.0;

/// Radius outside which a Gaussian-profile kernel is treated as zero when smoothing.
const GAUSSIAN_SMOOTHING_RADIUS: f64 = 12.0;

/// A piecewise-linear nonnegative profile with finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedProfile {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TabulatedProfile {
    /// Nodes must be strictly increasing, values finite and nonnegative. The profile is
    /// zero outside `[xs[0], xs[last]]`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::Input("tabulated profile needs ≥ 2 nodes and matching values".into()));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("tabulated nodes must be finite and strictly increasing".into()));
        }
        if ys.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
            return Err(Error::Input("tabulated values must be finite and nonnegative".into()));
        }
        Ok(TabulatedProfile { xs, ys })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    fn eval(&self, t: f64) -> f64 {
        let (xs, ys) = (&self.xs, &self.ys);
        if t < xs[0] || t > xs[xs.len() - 1] {
            return 0.0;
        }
        let i = xs.partition_point(|&x| x <= t).clamp(1, xs.len() - 1);
        let w = (t - xs[i - 1]) / (xs[i] - xs[i - 1]);
        ys[i - 1] + w * (ys[i] - ys[i - 1])
    }

    /// Exact `∫ tᵐ p(t) dt`, segment by segment.
    fn raw_moment(&self, m: usize) -> f64 {
        let pw = |x: f64, k: usize| x.powi(k as i32) / k as f64;
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| {
                let slope = (y[1] - y[0]) / (x[1] - x[0]);
                let c0 = y[0] - slope * x[0];
                c0 * (pw(x[1], m + 1) - pw(x[0], m + 1)) + slope * (pw(x[1], m + 2) - pw(x[0], m + 2))
            })
            .sum()
    }

    fn is_symmetric(&self) -> bool {
        let n = self.xs.len();
        (0..n).all(|i| {
            let j = n - 1 - i;
            (self.xs[i] + self.xs[j]).abs() <= 1e-14 * (1.0 + self.xs[i].abs())
                && (self.ys[i] - self.ys[j]).abs() <= 1e-14 * (1.0 + self.ys[i].abs())
        })
    }
}

/// Base profile multiplied by the kernel's polynomial factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Profile {
    /// Standard normal density.
    Gaussian,
    /// `(3/4)(1 − t²)` on `[−1, 1]`.
    Epanechnikov,
    /// `1/2` on `[−1, 1]`.
    Uniform,
    Tabulated(TabulatedProfile),
}

impl Profile {
    pub const NAMES: [&'static str; 3] = ["gaussian", "epanechnikov", "uniform"];

    pub fn from_name(name: &str) -> Result<Profile> {
        match name {
            "gaussian" => Ok(Profile::Gaussian),
            "epanechnikov" => Ok(Profile::Epanechnikov),
            "uniform" => Ok(Profile::Uniform),
            other => Err(Error::Config(format!(
                "unknown kernel profile '{other}'; available: {}",
                Profile::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Gaussian => "gaussian",
            Profile::Epanechnikov => "epanechnikov",
            Profile::Uniform => "uniform",
            Profile::Tabulated(_) => "tabulated",
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * t * t).exp(),
            Profile::Epanechnikov => {
                if t.abs() <= 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
            Profile::Uniform => {
                if t.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Profile::Tabulated(tab) => tab.eval(t),
        }
    }

    /// Half-width `M` of the support `[−M, M]`, if finite.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Gaussian => None,
            Profile::Epanechnikov | Profile::Uniform => Some(1.0),
            Profile::Tabulated(tab) => Some(tab.xs[0].abs().max(tab.xs[tab.xs.len() - 1].abs())),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Profile::Tabulated(tab) => tab.is_symmetric(),
            _ => true,
        }
    }

    /// `μ_m = ∫ tᵐ p(t) dt` in closed form.
    pub fn raw_moment(&self, m: usize) -> Result<f64> {
        let odd_zero = m % 2 == 1 && self.is_symmetric();
        let v = match self {
            _ if odd_zero => 0.0,
            // (m − 1)!! for even m
            Profile::Gaussian => (1..m).step_by(2).map(|k| k as f64).product(),
            Profile::Epanechnikov => 3.0 / ((m + 1) as f64 * (m + 3) as f64),
            Profile::Uniform => 1.0 / (m + 1) as f64,
            Profile::Tabulated(tab) => tab.raw_moment(m),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Divergence(format!("moment {m} of the {} profile overflows", self.name())))
        }
    }

    /// Points where the profile is not smooth, for quadrature splitting.
    fn kinks(&self) -> Vec<f64> {
        match self {
            Profile::Gaussian => Vec::new(),
            Profile::Epanechnikov | Profile::Uniform => vec![-1.0, 1.0],
            Profile::Tabulated(tab) => tab.xs.clone(),
        }
    }
}

/// Detected order of a kernel, per `α_0 = 1`, `α_1 = … = α_{s−1} = 0`, `α_s ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatus {
    Order(usize),
    /// All of `α_1..α_{j_max}` vanish within tolerance.
    NoOrderUpTo(usize),
    /// `α_0` differs from 1 beyond tolerance.
    NotAKernel { alpha0: f64 },
}

/// Signed moments `α_0..α_J` of a kernel together with its detected order.
#[derive(Debug, Clone)]
pub struct MomentProfile {
    pub signed: Vec<f64>,
    pub status: OrderStatus,
    pub tol: f64,
    kernel: Kernel,
}

impl MomentProfile {
    pub fn order(&self) -> Option<usize> {
        match self.status {
            OrderStatus::Order(s) => Some(s),
            _ => None,
        }
    }

    /// `β_s`, computed on demand.
    pub fn absolute(&self, s: f64) -> Result<f64> {
        self.kernel.abs_moment(s, self.tol.min(1e-10))
    }
}

/// `K(t) = (Σ a_i tⁱ) · profile(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelDoc")]
pub struct Kernel {
    profile: Profile,
    coeffs: Vec<f64>,
    #[serde(skip_serializing)]
    symmetric: bool,
}

#[derive(Deserialize)]
struct KernelDoc {
    profile: Profile,
    coeffs: Vec<f64>,
}

impl TryFrom<KernelDoc> for Kernel {
    type Error = Error;
    fn try_from(doc: KernelDoc) -> Result<Kernel> {
        Kernel::new(doc.profile, doc.coeffs)
    }
}

impl Kernel {
    pub fn new(profile: Profile, coeffs: Vec<f64>) -> Result<Kernel> {
        if coeffs.is_empty() {
            return Err(Error::Input("kernel polynomial needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("kernel coefficients must be finite".into()));
        }
        let symmetric = profile.is_symmetric() && coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0);
        Ok(Kernel { profile, coeffs, symmetric })
    }

    /// The bare profile, i.e. coefficients `[1]`.
    pub fn from_profile(profile: Profile) -> Kernel {
        Kernel::new(profile, vec![1.0]).expect("unit polynomial is valid")
    }

    pub fn gaussian() -> Kernel {
        Kernel::from_profile(Profile::Gaussian)
    }

    pub fn epanechnikov() -> Kernel {
        Kernel::from_profile(Profile::Epanechnikov)
    }

    pub fn uniform() -> Kernel {
        Kernel::from_profile(Profile::Uniform)
    }

    pub fn by_name(name: &str) -> Result<Kernel> {
        Profile::from_name(name).map(Kernel::from_profile)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.profile.support_radius()
    }

    /// Radius beyond which the kernel is negligible for smoothing integrals.
    pub fn effective_radius(&self) -> f64 {
        self.support_radius().unwrap_or(GAUSSIAN_SMOOTHING_RADIUS)
    }

    fn quadrature_radius(&self) -> f64 {
        self.support_radius().unwrap_or(GAUSSIAN_UNDERFLOW_RADIUS)
    }

    /// Evaluates the kernel without checking `t`; exactly 0 outside a finite support.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let p = self.profile.eval(t);
        if p == 0.0 {
            return 0.0;
        }
        poly::horner(&self.coeffs, t) * p
    }

    pub fn try_eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Input(format!("kernel argument must be finite, got {t}")));
        }
        Ok(self.eval(t))
    }

    /// `(S_h K)(x) = K(x/h) / h`.
    #[inline]
    pub fn scaled(&self, h: f64, x: f64) -> f64 {
        self.eval(x / h) / h
    }

    pub fn eval_scaled(&self, h: f64, x: f64) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
        }
        self.try_eval(x / h).map(|v| v / h)
    }

    /// Signed moment `α_j` in closed form.
    pub fn moment(&self, j: usize) -> Result<f64> {
        if self.symmetric && j % 2 == 1 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a != 0.0 {
                acc += a * self.profile.raw_moment(i + j)?;
            }
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::Divergence(format!("moment {j} is not finite")))
        }
    }

    /// Signed moment `α_j` by adaptive quadrature (an independent route to [`Kernel::moment`]).
    pub fn moment_by_quadrature(&self, j: usize, spec: &QuadratureSpec) -> Result<f64> {
        let r = self.quadrature_radius();
        let bp = self.breakpoints(-r, r);
        let v = integrate(|t| t.powi(j as i32) * self.eval(t), -r, r, &bp, spec)?;
        Ok(v.value)
    }

    /// Absolute moment `β_s = ∫|t|ˢ|K(t)|dt` for real `s ≥ 0`, by quadrature.
    pub fn abs_moment(&self, s: f64, tol: f64) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Input(format!("absolute moment order must be ≥ 0, got {s}")));
        }
        if !(tol > 0.0) {
            return Err(Error::Input("tolerance must be positive".into()));
        }
        let r = self.quadrature_radius();
        let bp = self.breakpoints(-r, r);
        let spec = QuadratureSpec::with_tol(tol, tol);
        let v = integrate(|t| t.abs().powf(s) * self.eval(t).abs(), -r, r, &bp, &spec)?;
        if v.value.is_finite() {
            Ok(v.value)
        } else {
            Err(Error::Divergence(format!("β_{s} is not finite")))
        }
    }

    /// Tail mass `∫_{|t|>T} |tˢ K(t)| dt`.
    pub fn abs_tail_moment(&self, s: f64, threshold: f64, tol: f64) -> Result<f64> {
        let r = self.quadrature_radius();
        if threshold >= r {
            return Ok(0.0);
        }
        let spec = QuadratureSpec::with_tol(tol, tol);
        let f = |t: f64| t.abs().powf(s) * self.eval(t);
        let right = integrate_abs(f, threshold, r, &self.breakpoints(threshold, r), &spec)?;
        let left = integrate_abs(f, -r, -threshold, &self.breakpoints(-r, -threshold), &spec)?;
        Ok(left.value + right.value)
    }

    /// Profile kinks, zero, and polynomial roots inside `[lo, hi]`.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut bp = poly::real_roots_in(&self.coeffs, lo, hi);
        bp.extend(self.profile.kinks().into_iter().filter(|&k| k > lo && k < hi));
        if lo < 0.0 && hi > 0.0 {
            bp.push(0.0);
        }
        bp.sort_by(f64::total_cmp);
        bp
    }

    /// Fills `α_0..α_{j_max}` and detects the order.
    pub fn detect_order(&self, j_max: usize, tol: f64) -> Result<MomentProfile> {
        if j_max < 1 {
            return Err(Error::Input("j_max must be at least 1".into()));
        }
        let signed = (0..=j_max).map(|j| self.moment(j)).collect::<Result<Vec<_>>>()?;
        let status = if (signed[0] - 1.0).abs() > tol {
            OrderStatus::NotAKernel { alpha0: signed[0] }
        } else {
            match (1..=j_max).find(|&j| signed[j].abs() > tol) {
                Some(s) => OrderStatus::Order(s),
                None => OrderStatus::NoOrderUpTo(j_max),
            }
        };
        Ok(MomentProfile { signed, status, tol, kernel: self.clone() })
    }

    /// `self + c · other`; both kernels must share the profile.
    pub fn add_scaled(&self, c: f64, other: &Kernel) -> Result<Kernel> {
        if self.profile != other.profile {
            return Err(Error::Input(format!(
                "cannot combine kernels over different profiles ({} and {})",
                self.profile.name(),
                other.profile.name()
            )));
        }
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| self.coeffs.get(i).copied().unwrap_or(0.0) + c * other.coeffs.get(i).copied().unwrap_or(0.0))
            .collect();
        Kernel::new(self.profile.clone(), coeffs)
    }

    pub fn scale(&self, c: f64) -> Result<Kernel> {
        Kernel::new(self.profile.clone(), self.coeffs.iter().map(|a| c * a).collect())
    }
}

/// Density of the standard normal.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}
