use num_complex::Complex64;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                op: "cholesky",
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let max_diag = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
        let floor = (n as f64) * f64::EPSILON * max_diag;
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > floor) || !d.is_finite() {
                return Err(Error::NumericalRank { index: j, pivot: d.abs() });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(Error::ShapeMismatch {
                op: "cholesky_solve",
                left: self.l.shape(),
                right: b.shape(),
            });
        }
        let mut x = b.clone();
        for col in 0..b.cols() {
            // L y = b
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)].re;
            }
            // L^H x = y
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)].conj() * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)].re;
            }
        }
        Ok(x)
    }
}

/// Solves `a X = b` for Hermitian positive definite `a`.
pub fn solve_hermitian_psd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Cholesky::new(a)?.solve(b)
}

/// Inverse of a Hermitian positive definite matrix, symmetrized.
pub fn inverse_hermitian_pd(a: &CMatrix) -> Result<CMatrix> {
    Ok(solve_hermitian_psd(a, &CMatrix::identity(a.rows()))?.hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{sample_complex_gaussian, SeedSpec};

    #[test]
    fn identity_system() {
        let b = sample_complex_gaussian(3, 2, SeedSpec::new(1, 1));
        let x = solve_hermitian_psd(&CMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn scalar_matrix() {
        let a = CMatrix::identity(3).scale(2.0);
        let x = solve_hermitian_psd(&a, &CMatrix::identity(3)).unwrap();
        assert!(x.relative_gap(&CMatrix::identity(3).scale(0.5)) < 1e-15);
    }

    #[test]
    fn random_pd_residual() {
        let x = sample_complex_gaussian(5, 5, SeedSpec::new(2, 9));
        let a = (&x.adjoint() * &x).add_identity(1.0).hermitian_part();
        let b = sample_complex_gaussian(5, 3, SeedSpec::new(2, 10));
        let sol = solve_hermitian_psd(&a, &b).unwrap();
        let resid = (&(&a * &sol) - &b).frobenius_norm();
        assert!(resid <= 1e-9 * b.frobenius_norm());
    }

    #[test]
    fn singular_and_indefinite_are_rejected() {
        let singular = CMatrix::from_diag(&[1.0, 0.0]);
        match solve_hermitian_psd(&singular, &CMatrix::identity(2)) {
            Err(Error::NumericalRank { index, pivot }) => {
                assert_eq!(index, 1);
                assert_eq!(pivot, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let indefinite = CMatrix::from_diag(&[1.0, -4.0]);
        assert!(matches!(
            solve_hermitian_psd(&indefinite, &CMatrix::identity(2)),
            Err(Error::NumericalRank { pivot, .. }) if pivot == 4.0
        ));
    }
}
