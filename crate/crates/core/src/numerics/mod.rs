//! Shared numeric kernels: jittered Cholesky and the triangular algebra
//! around it, seeded RNG streams, reparameterized multivariate-normal
//! sampling, and central finite-difference gradient checks.

mod gradcheck;
mod linalg;
mod rng;

pub use gradcheck::{finite_diff_check, DEFAULT_FD_STEP};
pub use linalg::{
    cho_solve, cholesky, cholesky_backward, cholesky_default, symmetrize, LowerTriangular, DEFAULT_JITTER_SCHEDULE,
};
pub use rng::{NoiseSource, RngStream, ZeroNoise};

use ndarray::{Array1, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix not factorizable after exhausting jitter schedule (last jitter {last_jitter:e})")]
    NotFactorizable { last_jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite function value at coordinate {coord}")]
    NonFiniteValue { coord: usize },
    #[error("lower-triangular factor has non-positive diagonal entry at {0}")]
    BadFactor(usize),
}

/// Draws `mean + factor * eps` with `eps ~ N(0, I)` and returns both the
/// sample and the `eps` used, so callers can differentiate through the
/// draw with `eps` held fixed.
pub fn mvn_sample(
    mean: ArrayView1<f64>,
    factor: &LowerTriangular,
    noise: &mut impl NoiseSource,
) -> Result<(Array1<f64>, Array1<f64>), NumericsError> {
    let n = factor.dim();
    if mean.len() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            got: mean.len(),
        });
    }
    let eps: Array1<f64> = (0..n).map(|_| noise.standard_normal()).collect();
    let sample = &mean + &factor.matrix().dot(&eps);
    Ok((sample, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};

    #[test]
    fn zero_noise_returns_mean() {
        let f = cholesky_default(&arr2(&[[2.0, 0.5], [0.5, 1.0]])).unwrap();
        let mean = arr1(&[1.0, -3.0]);
        let (s, eps) = mvn_sample(mean.view(), &f, &mut ZeroNoise).unwrap();
        assert_eq!(s, mean);
        assert!(eps.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let f = cholesky_default(&Array2::eye(3)).unwrap();
        let err = mvn_sample(arr1(&[0.0]).view(), &f, &mut ZeroNoise).unwrap_err();
        assert_eq!(err, NumericsError::DimensionMismatch { expected: 3, got: 1 });
    }

    #[test]
    fn small_isotropic_factor_std() {
        let n = 3;
        let f = LowerTriangular::new(Array2::eye(n) * 1e-4).unwrap();
        let mean = Array1::zeros(n);
        let mut rng = RngStream::new(11, 0);
        let draws = 100_000;
        let mut sq = vec![0.0; n];
        for _ in 0..draws {
            let (s, _) = mvn_sample(mean.view(), &f, &mut rng).unwrap();
            for (acc, v) in sq.iter_mut().zip(s.iter()) {
                *acc += v * v;
            }
        }
        for acc in sq {
            let std = (acc / draws as f64).sqrt();
            assert!((std - 1e-4).abs() / 1e-4 < 0.05, "std {std}");
        }
    }

    #[test]
    fn fixed_stream_is_reproducible() {
        let f = cholesky_default(&arr2(&[[1.0, 0.3], [0.3, 2.0]])).unwrap();
        let mean = arr1(&[0.5, 0.5]);
        let a = mvn_sample(mean.view(), &f, &mut RngStream::new(5, 9)).unwrap();
        let b = mvn_sample(mean.view(), &f, &mut RngStream::new(5, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_covariance_converges() {
        // Well-conditioned 8x8 factor.
        let n = 8;
        let mut l0 = Array2::<f64>::zeros((n, n));
        let mut r = RngStream::new(3, 1);
        for i in 0..n {
            for j in 0..i {
                l0[[i, j]] = r.uniform(-0.3, 0.3);
            }
            l0[[i, i]] = r.uniform(0.8, 1.2);
        }
        let factor = LowerTriangular::new(l0.clone()).unwrap();
        let target = l0.dot(&l0.t());
        let mean = Array1::zeros(n);
        let draws = 10_000;
        let mut cov = Array2::<f64>::zeros((n, n));
        let mut rng = RngStream::new(77, 0);
        for _ in 0..draws {
            let (s, _) = mvn_sample(mean.view(), &factor, &mut rng).unwrap();
            for i in 0..n {
                for j in 0..n {
                    cov[[i, j]] += s[i] * s[j];
                }
            }
        }
        cov /= draws as f64;
        let scale = target.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (c, t) in cov.iter().zip(target.iter()) {
            assert!((c - t).abs() <= 0.05 * scale, "{c} vs {t}");
        }
    }
}
