#![allow(dead_code)]

use relaylab::numerics::{sample_complex_gaussian, CMatrix, Complex64, SeedSpec};

pub const SHAPES: [(usize, usize, usize); 6] = [(1, 1, 1), (2, 2, 2), (2, 3, 2), (3, 2, 4), (2, 2, 1), (4, 2, 3)];

/// Unitary matrix from Gram-Schmidt on Gaussian columns.
pub fn random_unitary(n: usize, seed: SeedSpec) -> CMatrix {
    let a = sample_complex_gaussian(n, n, seed);
    let mut q = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut v: Vec<Complex64> = (0..n).map(|i| a[(i, j)]).collect();
        for k in 0..j {
            let dot: Complex64 = (0..n).map(|i| q[(i, k)].conj() * v[i]).sum();
            for i in 0..n {
                v[i] -= q[(i, k)] * dot;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] = v[i] / norm;
        }
    }
    q
}

/// `A A^H + shift I` for a Gaussian `A`.
pub fn random_pd(n: usize, shift: f64, seed: SeedSpec) -> CMatrix {
    let a = sample_complex_gaussian(n, n, seed);
    (&a * &a.adjoint()).add_identity(shift).hermitian_part()
}

/// Deterministic uniform in `[0, 1)` from a seed, for picking test parameters.
pub fn uniform(seed: SeedSpec) -> f64 {
    use rand::Rng;
    seed.rng().random::<f64>()
}
