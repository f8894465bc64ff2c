use ndarray::{Array2, ArrayView2};

use super::NumericsError;

/// Jitter levels tried in order when a kernel matrix is numerically
/// indefinite.
pub const DEFAULT_JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

const SYMMETRY_TOL: f64 = 1e-9;

/// A lower-triangular Cholesky factor with strictly positive diagonal.
///
/// `jitter` records the diagonal shift `j` such that `L Lᵀ = A + j I` for
/// the matrix it was computed from (zero when built directly).
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    l: Array2<f64>,
    jitter: f64,
}

impl LowerTriangular {
    /// Wraps an explicit factor. The upper triangle is zeroed.
    pub fn new(mut l: Array2<f64>) -> Result<Self, NumericsError> {
        let (r, c) = l.dim();
        if r != c {
            return Err(NumericsError::NotSquare { rows: r, cols: c });
        }
        for i in 0..r {
            let d = l[[i, i]];
            if !(d > 0.0 && d.is_finite()) {
                return Err(NumericsError::BadFactor(i));
            }
            for j in (i + 1)..c {
                l[[i, j]] = 0.0;
            }
        }
        Ok(Self { l, jitter: 0.0 })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            l: Array2::eye(n),
            jitter: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.l.dot(&self.l.t())
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L X = B` by forward substitution.
    pub fn solve_lower(&self, b: &ArrayView2<f64>) -> Array2<f64> {
        let n = self.dim();
        let mut x = b.to_owned();
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[[i, col]];
                for k in 0..i {
                    s -= self.l[[i, k]] * x[[k, col]];
                }
                x[[i, col]] = s / self.l[[i, i]];
            }
        }
        x
    }

    /// Solves `Lᵀ X = B` by back substitution.
    pub fn solve_upper_t(&self, b: &ArrayView2<f64>) -> Array2<f64> {
        let n = self.dim();
        let mut x = b.to_owned();
        for col in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut s = x[[i, col]];
                for k in (i + 1)..n {
                    s -= self.l[[k, i]] * x[[k, col]];
                }
                x[[i, col]] = s / self.l[[i, i]];
            }
        }
        x
    }

    /// `(L Lᵀ)⁻¹`.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        symmetrize(&cho_solve(self, &Array2::eye(n).view()))
    }
}

/// Solves `(L Lᵀ) X = B`.
pub fn cho_solve(factor: &LowerTriangular, b: &ArrayView2<f64>) -> Array2<f64> {
    let y = factor.solve_lower(b);
    factor.solve_upper_t(&y.view())
}

pub fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    (a + &a.t()) * 0.5
}

fn try_factor(a: &Array2<f64>, jitter: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]] + jitter;
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Cholesky factorization `L Lᵀ = A + j I` where `j` is the first entry of
/// `jitter_schedule` for which the factorization succeeds.
pub fn cholesky(a: &Array2<f64>, jitter_schedule: &[f64]) -> Result<LowerTriangular, NumericsError> {
    let (r, c) = a.dim();
    if r != c {
        return Err(NumericsError::NotSquare { rows: r, cols: c });
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let gap = (a[[i, j]] - a[[j, i]]).abs();
            if gap > SYMMETRY_TOL || gap.is_nan() {
                return Err(NumericsError::NotSymmetric { i, j, gap });
            }
        }
    }
    for &jitter in jitter_schedule {
        if let Some(l) = try_factor(a, jitter) {
            return Ok(LowerTriangular { l, jitter });
        }
    }
    Err(NumericsError::NotFactorizable {
        last_jitter: jitter_schedule.last().copied().unwrap_or(0.0),
    })
}

pub fn cholesky_default(a: &Array2<f64>) -> Result<LowerTriangular, NumericsError> {
    cholesky(a, &DEFAULT_JITTER_SCHEDULE)
}

/// Reverse-mode sensitivity of the Cholesky factorization.
///
/// Given the factor `L` of a symmetric `A` and the adjoint `L̄` of some
/// scalar with respect to the lower triangle of `L`, returns the symmetric
/// adjoint `Ā`, i.e. `⟨Ā, dA⟩ = ⟨L̄, dL⟩` for every symmetric `dA`.
pub fn cholesky_backward(factor: &LowerTriangular, l_bar: &Array2<f64>) -> Array2<f64> {
    let l = factor.matrix();
    let n = l.nrows();
    // P = Φ(Lᵀ L̄): lower triangle with halved diagonal.
    let mut p = l.t().dot(l_bar);
    for i in 0..n {
        for j in (i + 1)..n {
            p[[i, j]] = 0.0;
        }
        p[[i, i]] *= 0.5;
    }
    // Ā = L⁻ᵀ P L⁻¹
    let left = factor.solve_upper_t(&p.view());
    let abar = factor.solve_upper_t(&left.t()).reversed_axes();
    symmetrize(&abar)
}

#[cfg(test)]
pub(crate) fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
