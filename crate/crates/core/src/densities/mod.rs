//! Test densities with analytic derivatives, exact samplers, smoothness metadata,
//! continuity moduli and Lipschitz-class witnesses.

mod modulus;
mod witness;

pub use modulus::{continuity_modulus, fit_modulus_exponent, DEFAULT_SHIFT_GRID};
pub use witness::{make_witness_compact, make_witness_exponential, LipschitzWitness, WitnessKind};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::std_normal_pdf;
use crate::poly;
use crate::quadrature::{integrate_abs, QuadratureSpec};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `φ⁽ʲ⁾(z) = (−1)ʲ Heⱼ(z) φ(z)` with probabilists' Hermite polynomials.
fn std_normal_deriv(j: usize, z: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, z);
    let he = match j {
        0 => 1.0,
        _ => {
            for k in 1..j {
                let h2 = z * h1 - k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    sign * he * std_normal_pdf(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Exponent `k` of the bump `c (1 − x²)ᵏ`.
const BUMP_POWER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// Standard normal.
    Gaussian,
    /// Finite mixture of normals.
    Mixture(Vec<NormalComponent>),
    /// `c (1 − x²)⁴` on `[−1, 1]`; `derivs[j]` is the expanded polynomial of `f⁽ʲ⁾` inside the support.
    Bump { derivs: Vec<Vec<f64>> },
    /// `e^{−x} / (1 + e^{−x})²`; `sigma_polys[j]` expresses `f⁽ʲ⁾` as a polynomial in the logistic sigmoid.
    Logistic { sigma_polys: Vec<Vec<f64>> },
}

/// A density with derivatives up to `s_max` and an exact sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    name: &'static str,
    kind: DensityKind,
    s_max: usize,
}

impl DensityModel {
    pub fn gaussian() -> Self {
        DensityModel { name: "gaussian", kind: DensityKind::Gaussian, s_max: 4 }
    }

    /// `0.4·N(−1, 0.6²) + 0.6·N(1.2, 0.9²)`.
    pub fn mixture() -> Self {
        let comps = vec![
            NormalComponent { weight: 0.4, mean: -1.0, sd: 0.6 },
            NormalComponent { weight: 0.6, mean: 1.2, sd: 0.9 },
        ];
        DensityModel { name: "mixture", kind: DensityKind::Mixture(comps), s_max: 4 }
    }

    /// `(315/256)(1 − x²)⁴` on `[−1, 1]`. Derivatives are continuous up to order 3 and
    /// Lipschitz up to order 3, so `s_max = 3`.
    pub fn bump() -> Self {
        // (1 − x²)⁴ = Σ_k C(4,k) (−1)^k x^{2k}
        let c = 315.0 / 256.0;
        let mut p = vec![0.0; 2 * BUMP_POWER + 1];
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for (k, b) in binom.iter().enumerate() {
            p[2 * k] = c * b * if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        let mut derivs = vec![p];
        while derivs.last().is_some_and(|q| !q.is_empty()) {
            let next = poly::derivative(derivs.last().expect("non-empty"));
            derivs.push(next);
        }
        DensityModel { name: "bump", kind: DensityKind::Bump { derivs }, s_max: BUMP_POWER - 1 }
    }

    pub fn logistic() -> Self {
        let s_max = 4;
        let factor = [0.0, 1.0, -1.0]; // σ(1 − σ)
        let mut polys = vec![factor.to_vec()];
        for j in 0..=s_max {
            let d = poly::derivative(&polys[j]);
            polys.push(poly_mul(&d, &factor));
        }
        DensityModel { name: "logistic", kind: DensityKind::Logistic { sigma_polys: polys }, s_max }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    /// Highest derivative order available.
    pub fn s_max(&self) -> usize {
        self.s_max
    }

    /// Half-width `N` of the support `[−N, N]`, if compact.
    pub fn support(&self) -> Option<f64> {
        match self.kind {
            DensityKind::Bump { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Radius beyond which the density and its derivatives are negligible (below ~1e−25).
    pub fn effective_radius(&self) -> f64 {
        match &self.kind {
            DensityKind::Gaussian => 12.0,
            DensityKind::Mixture(c) => c.iter().map(|c| c.mean.abs() + 12.0 * c.sd).fold(0.0, f64::max),
            DensityKind::Bump { .. } => 1.0,
            DensityKind::Logistic { .. } => 64.0,
        }
    }

    /// Smallest radius `r` (to within 1e−3) with probability mass at most `eps` outside `[−r, r]`.
    pub fn tail_radius(&self, eps: f64) -> f64 {
        if let Some(n) = self.support() {
            return n;
        }
        let outside = |r: f64| self.cdf(-r) + (1.0 - self.cdf(r));
        let mut hi = 1.0;
        while outside(hi) > eps && hi < self.effective_radius() {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if outside(mid) > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi.min(self.effective_radius())
    }

    /// Points where some derivative up to `s_max + 1` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.support() {
            Some(n) => vec![-n, n],
            None => Vec::new(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.deriv_unchecked(0, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            DensityKind::Gaussian => std_normal_cdf(x),
            DensityKind::Mixture(comps) => comps.iter().map(|c| c.weight * std_normal_cdf((x - c.mean) / c.sd)).sum(),
            DensityKind::Bump { derivs } => {
                let t = x.clamp(-1.0, 1.0);
                let anti: Vec<f64> = std::iter::once(0.0)
                    .chain(derivs[0].iter().enumerate().map(|(i, c)| c / (i + 1) as f64))
                    .collect();
                (poly::horner(&anti, t) - poly::horner(&anti, -1.0)).clamp(0.0, 1.0)
            }
            DensityKind::Logistic { .. } => sigmoid(x),
        }
    }

    /// `f⁽ʲ⁾(x)`; errors when `j > s_max`.
    pub fn deriv(&self, j: usize, x: f64) -> Result<f64> {
        if j > self.s_max {
            return Err(Error::Capability(format!(
                "density '{}' provides derivatives up to order {}, asked for {j}",
                self.name, self.s_max
            )));
        }
        Ok(self.deriv_unchecked(j, x))
    }

    /// `f⁽ʲ⁾(x)` without the `s_max` check. Valid for `j ≤ s_max + 1` as an a.e. derivative.
    pub fn deriv_unchecked(&self, j: usize, x: f64) -> f64 {
        match &self.kind {
            DensityKind::Gaussian => std_normal_deriv(j, x),
            DensityKind::Mixture(comps) => comps
                .iter()
                .map(|c| c.weight * c.sd.powi(-(j as i32 + 1)) * std_normal_deriv(j, (x - c.mean) / c.sd))
                .sum(),
            DensityKind::Bump { derivs } => {
                if x.abs() >= 1.0 {
                    return 0.0;
                }
                derivs.get(j).map_or(0.0, |p| poly::horner(p, x))
            }
            DensityKind::Logistic { sigma_polys } => {
                // f is even, so f⁽ʲ⁾(x) = (−1)ʲ f⁽ʲ⁾(−x); evaluate at −|x| where σ is small.
                let Some(p) = sigma_polys.get(j) else {
                    return f64::NAN;
                };
                let u = sigmoid(-x.abs());
                let v = poly::horner(p, u);
                if x > 0.0 && j % 2 == 1 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// `n` exact draws from the density using the given RNG.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// `n` exact draws from a ChaCha20 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            DensityKind::Gaussian => rng.sample(StandardNormal),
            DensityKind::Mixture(comps) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = comps[comps.len() - 1];
                for c in comps {
                    acc += c.weight;
                    if u < acc {
                        chosen = *c;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                chosen.mean + chosen.sd * z
            }
            DensityKind::Bump { .. } => {
                // (1 − x²)⁴ on [−1, 1] is Beta(5, 5) mapped to [−1, 1]; Beta(5, 5) is the
                // 5th order statistic of 9 uniforms.
                let mut u = [0.0f64; 2 * BUMP_POWER + 1];
                for v in u.iter_mut() {
                    *v = rng.random();
                }
                u.sort_by(f64::total_cmp);
                2.0 * u[BUMP_POWER] - 1.0
            }
            DensityKind::Logistic { .. } => loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break (u / (1.0 - u)).ln();
                }
            },
        }
    }

    /// `‖f⁽ʲ⁾‖₁` by quadrature.
    pub fn l1_norm_of_deriv(&self, j: usize, spec: &QuadratureSpec) -> Result<f64> {
        self.deriv(j, 0.0)?;
        let r = self.effective_radius();
        let v = integrate_abs(|x| self.deriv_unchecked(j, x), -r, r, &self.breakpoints(), spec)?;
        Ok(v.value)
    }

    /// `‖f⁽ʲ⁾‖_C` from a dense grid followed by golden-section refinement around the maximum.
    pub fn sup_norm_of_deriv(&self, j: usize) -> Result<f64> {
        self.deriv(j, 0.0)?;
        let r = self.effective_radius().min(40.0);
        let n = 20_000;
        let g = |x: f64| self.deriv_unchecked(j, x).abs();
        let step = 2.0 * r / n as f64;
        let (mut best_x, mut best) = (0.0, g(0.0));
        for i in 0..=n {
            let x = -r + step * i as f64;
            let v = g(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        let (mut a, mut b) = (best_x - step, best_x + step);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - ratio * (b - a);
            let d = a + ratio * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        Ok(best.max(g(0.5 * (a + b))))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// All catalog densities.
pub fn catalog() -> Vec<DensityModel> {
    vec![DensityModel::gaussian(), DensityModel::mixture(), DensityModel::bump(), DensityModel::logistic()]
}

pub fn density_by_name(name: &str) -> Result<DensityModel> {
    catalog().into_iter().find(|d| d.name() == name).ok_or_else(|| {
        let names: Vec<_> = catalog().iter().map(|d| d.name()).collect();
        Error::Config(format!("unknown density '{name}'; available: {}", names.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_abs_diff_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::with_tol(1e-13, 1e-12)
    }

    #[test]
    fn every_density_is_normalised_and_nonnegative() {
        for d in catalog() {
            let r = d.effective_radius();
            let mass = integrate(|x| d.pdf(x), -r, r, &d.breakpoints(), &spec()).unwrap().value;
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
            for i in 0..=400 {
                let x = -r + 2.0 * r * i as f64 / 400.0;
                assert!(d.pdf(x) >= 0.0, "{} negative at {x}", d.name());
            }
        }
    }

    #[test]
    fn derivatives_integrate_to_zero() {
        for d in catalog() {
            let r = d.effective_radius();
            for j in 1..=d.s_max() {
                let v = integrate(|x| d.deriv_unchecked(j, x), -r, r, &d.breakpoints(), &QuadratureSpec::with_tol(1e-9, 1e-9))
                    .unwrap()
                    .value;
                assert!(v.abs() < 1e-6, "{} j={j}: {v}", d.name());
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-5;
        for d in catalog() {
            for j in 1..=d.s_max() {
                for &x in &[-0.7, -0.2, 0.1, 0.55] {
                    let fd = (d.deriv_unchecked(j - 1, x + eps) - d.deriv_unchecked(j - 1, x - eps)) / (2.0 * eps);
                    let an = d.deriv_unchecked(j, x);
                    assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()), "{} j={j} x={x}: {fd} vs {an}", d.name());
                }
            }
        }
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        for d in catalog() {
            let r = d.effective_radius();
            for &x in &[-0.8, 0.0, 0.3, 1.7] {
                let v = integrate(|t| d.pdf(t), -r, x, &d.breakpoints(), &spec()).unwrap().value;
                assert_abs_diff_eq!(d.cdf(x), v, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_second_derivative_l1_norm() {
        // |φ''| = |x² − 1|φ; sign changes at ±1 give ‖φ''‖₁ = 4φ(1).
        let v = DensityModel::gaussian().l1_norm_of_deriv(2, &spec()).unwrap();
        assert_abs_diff_eq!(v, 4.0 * std_normal_pdf(1.0), epsilon = 1e-11);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let b = DensityModel::bump();
        assert_eq!(b.support(), Some(1.0));
        for j in 0..=b.s_max() {
            assert_eq!(b.deriv(j, 1.5).unwrap(), 0.0);
            assert_eq!(b.deriv(j, -1.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_beyond_s_max_is_a_capability_error() {
        let b = DensityModel::bump();
        assert!(matches!(b.deriv(b.s_max() + 1, 0.0), Err(Error::Capability(_))));
    }

    #[test]
    fn logistic_derivative_decays_exponentially() {
        let d = DensityModel::logistic();
        for j in 0..=d.s_max() {
            let ratio = d.deriv_unchecked(j, 30.0).abs() * 30f64.exp();
            assert!(ratio.is_finite() && ratio < 10.0, "j={j} ratio {ratio}");
        }
    }

    #[test]
    fn unknown_density_lists_names() {
        match density_by_name("cauchy") {
            Err(Error::Config(m)) => assert!(m.contains("gaussian") && m.contains("logistic")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        for d in catalog() {
            assert_eq!(d.sample(7, 50), d.sample(7, 50));
            assert_ne!(d.sample(7, 50), d.sample(8, 50));
        }
    }

    #[test]
    fn sup_norm_of_gaussian_derivatives() {
        let d = DensityModel::gaussian();
        assert_abs_diff_eq!(d.sup_norm_of_deriv(0).unwrap(), std_normal_pdf(0.0), epsilon = 1e-14);
        // max |φ'| = φ(1)
        assert_abs_diff_eq!(d.sup_norm_of_deriv(1).unwrap(), std_normal_pdf(1.0), epsilon = 1e-12);
    }
}
