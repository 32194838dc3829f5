//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.
//!
//! Matrices in this crate are tiny (antenna counts), where Jacobi is both
//! accurate to working precision and fast enough for the Monte Carlo inner loop.

use num_complex::Complex64;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;
/// Negative eigenvalues within this fraction of the largest one are round-off.
const PSD_CLIP: f64 = 1e-10;

/// Eigenpairs of a Hermitian matrix, values sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Unitary; column `k` pairs with `values[k]`.
    pub vectors: CMatrix,
    pub values: Vec<f64>,
}

impl HermitianEig {
    /// `V diag(values) V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        &self.vectors.scale_columns(&self.values) * &self.vectors.adjoint()
    }
}

fn check_hermitian(a: &CMatrix, op: &'static str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op,
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_hermitian() {
        return Err(Error::NotHermitian {
            op,
            deviation: a.hermitian_deviation(),
        });
    }
    Ok(())
}

/// Full eigendecomposition with descending eigenvalues.
///
/// Each eigenvector is normalized so that its first non-negligible component
/// is real and positive. Small negative eigenvalues (down to `-1e-10 * max`)
/// are clipped to zero.
pub fn eig_hermitian_desc(a: &CMatrix) -> Result<HermitianEig> {
    check_hermitian(a, "eig_hermitian_desc")?;
    let n = a.rows();
    let (raw, v) = jacobi(a, true);
    let v = v.expect("vectors requested");
    let order = descending_order(&raw);
    let values = clip_psd(order.iter().map(|&k| raw[k]).collect());

    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let pivot = (0..n).map(|i| v[(i, src)]).find(|z| z.norm() > 1e-10);
        let gauge = pivot.map_or(Complex64::new(1.0, 0.0), |z| z.conj() / z.norm());
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)] * gauge;
        }
    }
    Ok(HermitianEig { vectors, values })
}

/// Eigenvalues only, descending; same clipping rule as [`eig_hermitian_desc`].
pub fn eigvals_hermitian_desc(a: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(a, "eigvals_hermitian_desc")?;
    let (raw, _) = jacobi(a, false);
    let order = descending_order(&raw);
    Ok(clip_psd(order.iter().map(|&k| raw[k]).collect()))
}

/// Descending eigenvalues of `A^H A` for an `m x n` matrix `A`.
///
/// One and two columns use closed forms; the smaller of two eigenvalues is
/// `det / lambda_max` with the determinant summed over 2x2 minors, which stays
/// accurate when `A` is close to rank one. Wider inputs go through Jacobi.
pub fn gram_eigvals_desc(a: &CMatrix) -> Vec<f64> {
    let m = a.rows();
    match a.cols() {
        0 => Vec::new(),
        1 => vec![(0..m).map(|i| a[(i, 0)].norm_sqr()).sum()],
        2 => {
            let (mut p, mut q, mut det) = (0.0, 0.0, 0.0);
            let mut b = Complex64::new(0.0, 0.0);
            for i in 0..m {
                let (x, y) = (a[(i, 0)], a[(i, 1)]);
                p += x.norm_sqr();
                q += y.norm_sqr();
                b += x.conj() * y;
                for j in (i + 1)..m {
                    det += (x * a[(j, 1)] - a[(j, 0)] * y).norm_sqr();
                }
            }
            let top = 0.5 * (p + q) + (0.5 * (p - q)).hypot(b.norm());
            let low = if top > 0.0 { det / top } else { 0.0 };
            vec![top, low]
        }
        _ => {
            let gram = (&a.adjoint() * a).hermitian_part();
            eigvals_hermitian_desc(&gram).expect("Gram matrix is square and Hermitian")
        }
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable: ties keep their original diagonal order
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

fn clip_psd(mut values: Vec<f64>) -> Vec<f64> {
    let top = values.first().copied().unwrap_or(0.0);
    if top > 0.0 {
        for v in values.iter_mut() {
            if *v < 0.0 && *v >= -PSD_CLIP * top {
                *v = 0.0;
            }
        }
    }
    values
}

fn jacobi(a: &CMatrix, want_vectors: bool) -> (Vec<f64>, Option<CMatrix>) {
    let n = a.rows();
    let mut w = a.hermitian_part();
    let mut v = want_vectors.then(|| CMatrix::identity(n));
    let scale = w.frobenius_norm();
    if scale == 0.0 || n == 1 {
        return (w.diag_real(), v);
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-16 * scale {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let b = w[(p, q)];
                let abs_b = b.norm();
                if abs_b <= 1e-300 {
                    continue;
                }
                let app = w[(p, p)].re;
                let aqq = w[(q, q)].re;
                // Skip rotations whose off-diagonal is below the diagonal's resolution.
                if abs_b < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    w[(p, q)] = Complex64::new(0.0, 0.0);
                    w[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let phase = b / abs_b;
                let theta = (aqq - app) / (2.0 * abs_b);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let ph_conj = phase.conj();

                // w <- w J
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = wkp * c - wkq * ph_conj * s;
                    w[(k, q)] = wkp * s + wkq * ph_conj * c;
                }
                // w <- J^H w
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = wpk * c - wqk * phase * s;
                    w[(q, k)] = wpk * s + wqk * phase * c;
                }
                w[(p, q)] = Complex64::new(0.0, 0.0);
                w[(q, p)] = Complex64::new(0.0, 0.0);
                w[(p, p)] = Complex64::new(app - t * abs_b, 0.0);
                w[(q, q)] = Complex64::new(aqq + t * abs_b, 0.0);

                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c - vkq * ph_conj * s;
                        v[(k, q)] = vkp * s + vkq * ph_conj * c;
                    }
                }
            }
        }
    }
    (w.diag_real(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_closed_forms_agree_with_jacobi() {
        use crate::numerics::{sample_complex_gaussian, SeedSpec};
        for (k, (m, n)) in [(1, 1), (3, 1), (1, 2), (2, 2), (4, 2), (3, 3)].into_iter().enumerate() {
            let a = sample_complex_gaussian(m, n, SeedSpec::new(5, k as u64));
            let fast = gram_eigvals_desc(&a);
            let slow = eigvals_hermitian_desc(&(&a.adjoint() * &a).hermitian_part()).unwrap();
            assert_eq!(fast.len(), slow.len());
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() <= 1e-12 * (1.0 + slow[0]), "{m}x{n}: {fast:?} vs {slow:?}");
            }
        }
        // rank one: the small eigenvalue is exactly zero rather than round-off
        let r1 = CMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(gram_eigvals_desc(&r1), vec![25.0, 0.0]);
        assert_eq!(gram_eigvals_desc(&CMatrix::zeros(3, 2)), vec![0.0, 0.0]);
    }
    use crate::numerics::rng::{sample_complex_gaussian, SeedSpec};

    fn gram(x: &CMatrix) -> CMatrix {
        (&x.adjoint() * x).hermitian_part()
    }

    #[test]
    fn identity_has_unit_values() {
        let e = eig_hermitian_desc(&CMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let u = &e.vectors.adjoint() * &e.vectors;
        assert!(u.relative_gap(&CMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn diagonal_is_sorted_descending() {
        let e = eig_hermitian_desc(&CMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        // gauge: first nonzero component real positive
        assert_eq!(e.vectors[(1, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn random_gram_reconstructs() {
        let x = sample_complex_gaussian(4, 4, SeedSpec::new(11, 0));
        let a = gram(&x);
        let e = eig_hermitian_desc(&a).unwrap();
        assert!(e.reconstruct().relative_gap(&a) <= 1e-10);
        let u = &e.vectors.adjoint() * &e.vectors;
        assert!(u.relative_gap(&CMatrix::identity(4)) <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let vals = eigvals_hermitian_desc(&a).unwrap();
        for (x, y) in vals.iter().zip(&e.values) {
            assert!((x - y).abs() <= 1e-12 * e.values[0]);
        }
    }

    #[test]
    fn rank_deficient_gram_clips_to_zero() {
        // 2x3 -> 3x3 Gram of rank 2
        let x = sample_complex_gaussian(2, 3, SeedSpec::new(5, 3));
        let e = eig_hermitian_desc(&gram(&x)).unwrap();
        assert!(e.values[2] >= 0.0);
        assert!(e.values[2] <= 1e-12 * e.values[0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(eig_hermitian_desc(&CMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
        let mut a = CMatrix::identity(2);
        a[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(eig_hermitian_desc(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn indefinite_values_survive() {
        let a = CMatrix::from_diag(&[2.0, -1.0]);
        assert_eq!(eigvals_hermitian_desc(&a).unwrap(), vec![2.0, -1.0]);
    }
}
