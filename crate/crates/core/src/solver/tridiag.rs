//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// LU factors of a tridiagonal matrix, reusable for several right-hand sides.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    pivot_inv: Vec<f64>,
}

impl Tridiagonal {
    /// Factors the matrix with sub-diagonal `lower[1..]`, diagonal `diag` and
    /// super-diagonal `upper[..n-1]`. `lower[0]` and `upper[n-1]` are ignored.
    pub fn factor(&mut self, lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<()> {
        let n = diag.len();
        self.lower.clear();
        self.lower.extend_from_slice(lower);
        self.upper_mod.resize(n, 0.0);
        self.pivot_inv.resize(n, 0.0);
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { lower[i] * prev_upper } else { 0.0 };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { row: i });
            }
            let inv = 1.0 / pivot;
            self.pivot_inv[i] = inv;
            prev_upper = if i + 1 < n { upper[i] * inv } else { 0.0 };
            self.upper_mod[i] = prev_upper;
        }
        Ok(())
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n {
            let prev = if i > 0 { self.lower[i] * rhs[i - 1] } else { 0.0 };
            rhs[i] = (rhs[i] - prev) * self.pivot_inv[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solves_diagonally_dominant_systems(
            rows in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..40),
        ) {
            let n = rows.len();
            let lower: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let upper: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let diag: Vec<f64> = rows.iter().map(|r| 2.5 + r.2).collect();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let mut b = vec![0.0; n];
            for i in 0..n {
                b[i] = diag[i] * x[i];
                if i > 0 { b[i] += lower[i] * x[i - 1]; }
                if i + 1 < n { b[i] += upper[i] * x[i + 1]; }
            }
            let mut t = Tridiagonal::default();
            t.factor(&lower, &diag, &upper).unwrap();
            t.solve_in_place(&mut b);
            for i in 0..n {
                prop_assert!((b[i] - x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut t = Tridiagonal::default();
        let err = t.factor(&[0.0, 1.0, 1.0], &[0.0, 1.0, 1.0], &[1.0, 1.0, 0.0]);
        assert_eq!(err, Err(Error::Singular { row: 0 }));
    }
}
