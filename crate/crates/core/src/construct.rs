//! The canonical kernel pair `(K₍₀₎, K₍ₛ₎)` obtained from the Hankel moment matrix of a
//! base kernel, and the bandwidth-dependent family `K_h = K₍₀₎ + hᵃ K₍ₛ₎`.
//!
//! For a nonnegative base kernel `K` with finite `β_{2s}`, the matrix
//! `A_s[i][j] = α_{i+j}(K)` (`i, j = 0..s`) is invertible. Solving `A_s a = b` and
//! multiplying `K` by the polynomial `Σ a_i tⁱ` gives a kernel whose moments
//! `α_0..α_s` equal `b`. Taking `b = e_0` yields `K₍₀₎` (unit mass, vanishing
//! moments `1..=s`) and `b = e_s` yields `K₍ₛ₎` (vanishing moments `0..s`, unit `α_s`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Profile, ORDER_TOL};
use crate::linalg::{rcond1, Lu};
use crate::poly;

/// Largest supported order; beyond this the Hankel matrices are hopelessly conditioned.
pub const MAX_ORDER: usize = 10;

/// Reciprocal condition numbers below this are refused as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Absolute bound on the moment residuals of a constructed pair, scaled up by the
/// magnitude of the terms summed for high orders.
pub const VERIFY_TOL: f64 = 1e-8;

/// `A_s = [α_{i+j}(base)]`, a symmetric Hankel matrix.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    pub s: usize,
    pub entries: Vec<Vec<f64>>,
    pub base: Kernel,
    /// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`.
    pub condition_estimate: f64,
    lu: Lu,
}

impl MomentMatrix {
    pub fn new(base: &Kernel, s: usize) -> Result<MomentMatrix> {
        if s == 0 || s > MAX_ORDER {
            return Err(Error::Input(format!("order s must be in 1..={MAX_ORDER}, got {s}")));
        }
        check_nonnegative(base)?;
        let moments = (0..=2 * s).map(|j| base.moment(j)).collect::<Result<Vec<_>>>()?;
        if (moments[0] - 1.0).abs() > ORDER_TOL {
            return Err(Error::Input(format!("base must integrate to 1, got α_0 = {}", moments[0])));
        }
        let entries: Vec<Vec<f64>> = (0..=s).map(|i| moments[i..=i + s].to_vec()).collect();
        let lu = Lu::factor(&entries)?;
        let rcond = rcond1(&entries, &lu);
        if rcond < RCOND_THRESHOLD {
            return Err(Error::Singular { rcond });
        }
        Ok(MomentMatrix { s, entries, base: base.clone(), condition_estimate: 1.0 / rcond, lu })
    }

    pub fn rcond(&self) -> f64 {
        1.0 / self.condition_estimate
    }

    /// Coefficients `a = A_s⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.s + 1 {
            return Err(Error::Input(format!("right-hand side must have length {}", self.s + 1)));
        }
        Ok(self.lu.solve(b))
    }

    /// The polynomial transform `(Σ a_i tⁱ) · base(t)` for `a = A_s⁻¹ b`.
    pub fn transform(&self, b: &[f64]) -> Result<Kernel> {
        let a = self.solve(b)?;
        Kernel::new(self.base.profile().clone(), poly_mul(&a, self.base.coeffs()))
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn check_nonnegative(base: &Kernel) -> Result<()> {
    let r = base.support_radius().unwrap_or(1e3);
    let c = base.coeffs();
    let crosses = !poly::real_roots_in(c, -r, r).is_empty();
    if crosses || poly::horner(c, 0.0) < 0.0 {
        return Err(Error::Input("the base kernel of a moment matrix must be nonnegative".into()));
    }
    Ok(())
}

/// Moment residuals of a constructed pair against their targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerification {
    /// `α_j(K₍₀₎) − δ_{j0}` for `j = 0..=s`.
    pub k0_residuals: Vec<f64>,
    /// `α_j(K₍ₛ₎) − δ_{js}` for `j = 0..=s`.
    pub ks_residuals: Vec<f64>,
    pub max_residual: f64,
}

/// `(K₍₀₎, K₍ₛ₎)` over a common base profile.
#[derive(Debug, Clone)]
pub struct KernelPair {
    pub k0: Kernel,
    pub ks: Kernel,
    pub s: usize,
    pub base: Kernel,
    pub verification: PairVerification,
    pub condition_estimate: f64,
}

impl KernelPair {
    pub fn construct(base: &Kernel, s: usize) -> Result<KernelPair> {
        let a = MomentMatrix::new(base, s)?;
        let mut e0 = vec![0.0; s + 1];
        e0[0] = 1.0;
        let mut es = vec![0.0; s + 1];
        es[s] = 1.0;
        let k0 = a.transform(&e0)?;
        let ks = a.transform(&es)?;
        let pair = KernelPair::assemble(k0, ks, s, base.clone(), a.condition_estimate)?;
        let bound = verify_bound(&pair);
        if pair.verification.max_residual > bound {
            return Err(Error::Consistency(format!(
                "constructed pair misses its moment conditions by {:.3e} (bound {bound:.3e})",
                pair.verification.max_residual
            )));
        }
        Ok(pair)
    }

    fn assemble(k0: Kernel, ks: Kernel, s: usize, base: Kernel, condition_estimate: f64) -> Result<KernelPair> {
        let target = |j: usize, hit: usize| if j == hit { 1.0 } else { 0.0 };
        let k0_residuals = (0..=s).map(|j| Ok(k0.moment(j)? - target(j, 0))).collect::<Result<Vec<_>>>()?;
        let ks_residuals = (0..=s).map(|j| Ok(ks.moment(j)? - target(j, s))).collect::<Result<Vec<_>>>()?;
        let max_residual = k0_residuals.iter().chain(&ks_residuals).fold(0.0f64, |m, r| m.max(r.abs()));
        Ok(KernelPair {
            k0,
            ks,
            s,
            base,
            verification: PairVerification { k0_residuals, ks_residuals, max_residual },
            condition_estimate,
        })
    }

    pub fn profile(&self) -> &Profile {
        self.k0.profile()
    }

    /// `K₍₀₎ + c · K₍ₛ₎`: an order-`s` kernel with `α_s = c` (for `c ≠ 0`).
    pub fn combine(&self, c: f64) -> Result<Kernel> {
        self.k0.add_scaled(c, &self.ks)
    }

    pub fn family(&self, a_exponent: f64) -> Result<BandwidthKernelFamily> {
        BandwidthKernelFamily::new(self.clone(), a_exponent)
    }

    pub fn to_document(&self) -> PairDocument {
        PairDocument {
            profile: self.profile().clone(),
            s: self.s,
            support_radius: self.k0.support_radius(),
            k0: self.k0.coeffs().to_vec(),
            ks: self.ks.coeffs().to_vec(),
            base: self.base.coeffs().to_vec(),
            verification: self.verification.clone(),
            condition_estimate: self.condition_estimate,
            a_exponent: None,
            h_cap: None,
        }
    }

    /// Rebuilds a pair from its document; the residuals are recomputed, not trusted.
    pub fn from_document(doc: &PairDocument) -> Result<KernelPair> {
        let k0 = Kernel::new(doc.profile.clone(), doc.k0.clone())?;
        let ks = Kernel::new(doc.profile.clone(), doc.ks.clone())?;
        let base = Kernel::new(doc.profile.clone(), doc.base.clone())?;
        let pair = KernelPair::assemble(k0, ks, doc.s, base, doc.condition_estimate)?;
        if pair.verification.max_residual > verify_bound(&pair) {
            return Err(Error::Consistency("document does not satisfy the pair moment conditions".into()));
        }
        Ok(pair)
    }
}

fn verify_bound(pair: &KernelPair) -> f64 {
    // Cancellation in Σ a_i μ_{i+j}: allow rounding proportional to the summed magnitudes.
    let scale = |k: &Kernel| -> f64 {
        (0..=pair.s)
            .map(|j| {
                k.coeffs()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a.abs() * k.profile().raw_moment(i + j).map_or(0.0, f64::abs))
                    .sum::<f64>()
            })
            .fold(1.0, f64::max)
    };
    VERIFY_TOL * scale(&pair.k0).max(scale(&pair.ks))
}

/// `h ↦ K₍₀₎ + hᵃ K₍ₛ₎` for `0 < h ≤ h_cap`.
#[derive(Debug, Clone)]
pub struct BandwidthKernelFamily {
    pub pair: KernelPair,
    pub a_exponent: f64,
    pub h_cap: f64,
}

impl BandwidthKernelFamily {
    pub fn new(pair: KernelPair, a_exponent: f64) -> Result<Self> {
        if !(a_exponent > 0.0 && a_exponent <= 1.0) {
            return Err(Error::Input(format!("a_exponent must be in (0, 1], got {a_exponent}")));
        }
        if pair.k0.profile() != pair.ks.profile() {
            return Err(Error::Input("pair kernels must share a base profile".into()));
        }
        Ok(BandwidthKernelFamily { pair, a_exponent, h_cap: 1.0 })
    }

    pub fn with_cap(mut self, h_cap: f64) -> Result<Self> {
        if !(h_cap > 0.0 && h_cap.is_finite()) {
            return Err(Error::Input(format!("h_cap must be positive, got {h_cap}")));
        }
        self.h_cap = h_cap;
        Ok(self)
    }

    pub fn s(&self) -> usize {
        self.pair.s
    }

    /// `hᵃ`, which is also `α_s` of the materialised kernel.
    pub fn weight(&self, h: f64) -> f64 {
        h.powf(self.a_exponent)
    }

    /// The kernel used at bandwidth `h`.
    pub fn at(&self, h: f64) -> Result<Kernel> {
        if !(h > 0.0 && h <= self.h_cap) {
            return Err(Error::Input(format!("bandwidth {h} outside (0, {}]", self.h_cap)));
        }
        self.pair.combine(self.weight(h))
    }

    pub fn to_document(&self) -> PairDocument {
        PairDocument {
            a_exponent: Some(self.a_exponent),
            h_cap: Some(self.h_cap),
            ..self.pair.to_document()
        }
    }

    pub fn from_document(doc: &PairDocument) -> Result<Self> {
        let a = doc
            .a_exponent
            .ok_or_else(|| Error::Input("document has no a_exponent; it describes a pair, not a family".into()))?;
        let fam = BandwidthKernelFamily::new(KernelPair::from_document(doc)?, a)?;
        fam.with_cap(doc.h_cap.unwrap_or(1.0))
    }
}

/// JSON form of a pair (and optionally of its bandwidth family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDocument {
    pub profile: Profile,
    pub s: usize,
    pub support_radius: Option<f64>,
    /// Polynomial coefficients of `K₍₀₎`, lowest degree first.
    pub k0: Vec<f64>,
    /// Polynomial coefficients of `K₍ₛ₎`.
    pub ks: Vec<f64>,
    /// Polynomial factor of the base kernel (`[1]` for a bare profile).
    pub base: Vec<f64>,
    pub verification: PairVerification,
    pub condition_estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_cap: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_moment_matrix() {
        let m = MomentMatrix::new(&Kernel::gaussian(), 2).unwrap();
        assert_eq!(m.entries, vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 3.0]]);
        assert!(m.condition_estimate.is_finite() && m.rcond() > RCOND_THRESHOLD);
    }

    #[test]
    fn uniform_moment_matrix() {
        let m = MomentMatrix::new(&Kernel::uniform(), 1).unwrap();
        assert_abs_diff_eq!(m.entries[0][0], 1.0);
        assert_eq!(m.entries[0][1], 0.0);
        assert_abs_diff_eq!(m.entries[1][1], 1.0 / 3.0, epsilon = 1e-16);
    }

    #[test]
    fn symmetric_base_gives_checkerboard() {
        let m = MomentMatrix::new(&Kernel::epanechnikov(), 4).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                if (i + j) % 2 == 1 {
                    assert_eq!(m.entries[i][j], 0.0);
                }
                if i + 1 <= 4 && j >= 1 {
                    assert_eq!(m.entries[i][j], m.entries[i + 1][j - 1]);
                }
            }
        }
    }

    #[test]
    fn order_out_of_range_or_signed_base_is_rejected() {
        assert!(MomentMatrix::new(&Kernel::gaussian(), 0).is_err());
        assert!(MomentMatrix::new(&Kernel::gaussian(), MAX_ORDER + 1).is_err());
        let signed = Kernel::new(Profile::Gaussian, vec![1.5, 0.0, -0.5]).unwrap();
        assert!(matches!(MomentMatrix::new(&signed, 2), Err(Error::Input(_))));
        let heavy = Kernel::new(Profile::Gaussian, vec![2.0]).unwrap();
        assert!(matches!(MomentMatrix::new(&heavy, 2), Err(Error::Input(_))));
    }

    #[test]
    fn degenerate_tabulated_base_is_singular() {
        // Mass concentrated near a single point: the moment matrix collapses to rank one.
        let tab = crate::kernel::TabulatedProfile::new(vec![-1e-9, 0.0, 1e-9], vec![0.0, 1e9, 0.0]).unwrap();
        let base = Kernel::from_profile(Profile::Tabulated(tab));
        assert!(matches!(MomentMatrix::new(&base, 3), Err(Error::Singular { .. })));
    }

    #[test]
    fn uniform_pair_s1() {
        let p = KernelPair::construct(&Kernel::uniform(), 1).unwrap();
        assert_abs_diff_eq!(p.k0.coeffs()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.k0.coeffs()[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.ks.coeffs()[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.ks.coeffs()[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn family_materialisation() {
        let fam = KernelPair::construct(&Kernel::gaussian(), 2).unwrap().family(1.0).unwrap();
        let k = fam.at(0.25).unwrap();
        assert_abs_diff_eq!(k.moment(0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k.moment(2).unwrap(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(k.eval(0.0), 1.375 * 0.398_942_280_401_432_7, epsilon = 1e-14);
        assert_abs_diff_eq!(k.eval(0.0), 0.548_545_635_551_97, epsilon = 1e-12);
        assert!(fam.at(0.0).is_err());
        assert!(fam.at(1.5).is_err());
        assert!(fam.clone().with_cap(2.0).unwrap().at(1.5).is_ok());
        assert!(KernelPair::construct(&Kernel::gaussian(), 2).unwrap().family(0.0).is_err());
        assert!(KernelPair::construct(&Kernel::gaussian(), 2).unwrap().family(1.5).is_err());
    }

    #[test]
    fn mismatched_profiles_are_rejected() {
        let mut p = KernelPair::construct(&Kernel::gaussian(), 2).unwrap();
        p.ks = Kernel::new(Profile::Uniform, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(BandwidthKernelFamily::new(p, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn document_round_trip_reverifies() {
        let fam = KernelPair::construct(&Kernel::epanechnikov(), 2).unwrap().family(0.5).unwrap();
        let json = serde_json::to_string(&fam.to_document()).unwrap();
        let doc: PairDocument = serde_json::from_str(&json).unwrap();
        let back = BandwidthKernelFamily::from_document(&doc).unwrap();
        assert_eq!(back.pair.k0, fam.pair.k0);
        assert_eq!(back.a_exponent, 0.5);

        let mut bad = doc.clone();
        bad.k0[0] += 0.1;
        assert!(matches!(KernelPair::from_document(&bad), Err(Error::Consistency(_))));
        let mut no_a = doc;
        no_a.a_exponent = None;
        assert!(BandwidthKernelFamily::from_document(&no_a).is_err());
    }
}
