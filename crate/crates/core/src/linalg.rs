//! Small dense linear solves for moment matrices.

use crate::error::{Error, Result};

/// LU factorisation with partial pivoting of a square row-major matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &[Vec<f64>]) -> Result<Lu> {
        let n = a.len();
        if n == 0 || a.iter().any(|row| row.len() != n) {
            return Err(Error::Input("LU needs a non-empty square matrix".into()));
        }
        let mut lu: Vec<f64> = a.iter().flatten().copied().collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { rcond: 0.0 });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in (k + 1)..n {
                let m = lu[i * n + k] / d;
                lu[i * n + k] = m;
                for j in (k + 1)..n {
                    lu[i * n + j] -= m * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut inv = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[i][j] = v;
            }
        }
        inv
    }
}

pub fn norm1(a: &[Vec<f64>]) -> f64 {
    let n = a.first().map_or(0, Vec::len);
    (0..n)
        .map(|j| a.iter().map(|row| row[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition number `1 / (‖A‖₁ ‖A⁻¹‖₁)`, computed from the exact inverse.
/// The matrices here are at most ~11×11 so an explicit inverse is cheap.
pub fn rcond1(a: &[Vec<f64>], lu: &Lu) -> f64 {
    let c = norm1(a) * norm1(&lu.inverse());
    if c.is_finite() && c > 0.0 {
        1.0 / c
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve(&[4.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        match Lu::factor(&a) {
            Err(Error::Singular { .. }) => {}
            Ok(lu) => assert!(rcond1(&a, &lu) < 1e-12),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn identity_has_unit_rcond() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let lu = Lu::factor(&a).unwrap();
        assert_eq!(rcond1(&a, &lu), 1.0);
    }
}
