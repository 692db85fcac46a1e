//! Dense polynomials in the monomial basis, coefficients stored low degree first.

/// Evaluates `Σ c_i t^i` by Horner's rule.
#[inline]
pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

/// Drops trailing coefficients that are exactly zero.
pub fn trim(coeffs: &[f64]) -> &[f64] {
    let len = coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    &coeffs[..len]
}

/// Real roots of the polynomial inside `[lo, hi]`, sorted ascending.
///
/// Works recursively: the roots of the derivative split the interval into
/// monotone pieces, each holding at most one root, which is then bracketed
/// and bisected. Intended for the low degrees (≤ ~20) used by kernels.
pub fn real_roots_in(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let c = trim(coeffs);
    if c.len() <= 1 || lo >= hi {
        return Vec::new();
    }
    if c.len() == 2 {
        let r = -c[0] / c[1];
        return if r > lo && r < hi { vec![r] } else { Vec::new() };
    }
    let mut knots = vec![lo];
    knots.extend(real_roots_in(&derivative(c), lo, hi));
    knots.push(hi);

    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (horner(c, a), horner(c, b));
        if fa == 0.0 {
            if a > lo && roots.last().is_none_or(|&r| r < a) {
                roots.push(a);
            }
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(bisect(|t| horner(c, t), a, b, fa));
        }
    }
    roots
}

/// Bisection on a bracketing interval; `fa` is the value at `a`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_direct_evaluation() {
        let c = [1.5, 0.0, -0.5];
        assert_eq!(horner(&c, 2.0), 1.5 - 2.0);
        assert_eq!(horner(&[], 3.0), 0.0);
    }

    #[test]
    fn roots_of_quadratic_and_quartic() {
        let r = real_roots_in(&[-1.0, 0.0, 1.0], -10.0, 10.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 1.0).abs() < 1e-14 && (r[1] - 1.0).abs() < 1e-14);

        // (t^2 - 1)(t^2 - 4) = t^4 - 5t^2 + 4
        let r = real_roots_in(&[4.0, 0.0, -5.0, 0.0, 1.0], -10.0, 10.0);
        let expect = [-2.0, -1.0, 1.0, 2.0];
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn no_roots_for_positive_polynomial() {
        assert!(real_roots_in(&[1.0, 0.0, 1.0], -5.0, 5.0).is_empty());
        assert!(real_roots_in(&[3.0], -5.0, 5.0).is_empty());
    }
}
