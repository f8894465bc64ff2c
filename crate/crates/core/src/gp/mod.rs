//! The learnable Gaussian-process blur.
//!
//! Kernel inputs are normalized horizon positions `t_i = i / tau`. The blur
//! covariance is the inducing-point (Nyström) approximation
//! `K_tz K_zz⁻¹ K_zt + σ² I`, and the kernel, noise and inducing locations
//! are trained both through the reparameterized blur draw and through a
//! sparse variational ELBO.

mod blur;
mod elbo;
mod kernel;

pub use blur::{
    blur_backward, isotropic_blur, isotropic_blur_backward, sample_blur, BlurDraw, BlurFactor, MAX_ISO_SIGMA,
};
pub use elbo::{elbo, elbo_backward};
pub use kernel::{blur_covariance, horizon_points, nystrom_cov, rbf_kernel};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{cholesky_default, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("blur draw does not match the given parameters or forecast")]
    StaleDraw,
    #[error("invalid GP parameters: {0}")]
    Invalid(String),
}

/// Kernel hyperparameters, inducing locations and the variational
/// distribution `N(var_mean, var_chol var_cholᵀ)` over inducing values.
#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    pub log_lengthscale: f64,
    pub log_amplitude: f64,
    pub log_noise: f64,
    pub inducing: Vec<f64>,
    pub var_mean: Vec<f64>,
    pub var_chol: Array2<f64>,
}

/// Initial kernel settings for a fresh blur.
///
/// The default amplitude sits inside the isotropic blur's `[0, 0.1]` range
/// so GP and isotropic corruption start at comparable magnitudes, and the
/// white-noise term is a small nugget so draws are dominated by the smooth
/// component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpInit {
    /// Number of inducing points; `None` means [`default_inducing_count`].
    pub inducing: Option<usize>,
    pub lengthscale: f64,
    pub amplitude: f64,
    pub noise: f64,
}

impl Default for GpInit {
    fn default() -> Self {
        Self {
            inducing: None,
            lengthscale: 0.2,
            amplitude: 0.05,
            noise: 0.01,
        }
    }
}

/// `max(4, tau / 4)`.
pub fn default_inducing_count(tau: usize) -> usize {
    (tau / 4).max(4)
}

impl GpParams {
    /// Inducing points evenly spaced at `(j + 0.5) / M`, zero variational
    /// mean, and `var_chol = chol(K_zz)` so the KL term starts at zero.
    pub fn init(tau: usize, init: &GpInit) -> Result<Self, GpError> {
        let m = init.inducing.unwrap_or_else(|| default_inducing_count(tau));
        if m == 0 {
            return Err(GpError::Invalid("need at least one inducing point".into()));
        }
        if !(init.lengthscale > 0.0 && init.amplitude > 0.0 && init.noise > 0.0) {
            return Err(GpError::Invalid(
                "lengthscale, amplitude and noise must be positive".into(),
            ));
        }
        let inducing: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
        let mut p = Self {
            log_lengthscale: init.lengthscale.ln(),
            log_amplitude: init.amplitude.ln(),
            log_noise: init.noise.ln(),
            inducing,
            var_mean: vec![0.0; m],
            var_chol: Array2::eye(m),
        };
        let kzz = rbf_kernel(&p.inducing, &p.inducing, &p);
        p.var_chol = cholesky_default(&kzz)?.into_matrix();
        Ok(p)
    }

    pub fn num_inducing(&self) -> usize {
        self.inducing.len()
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn amplitude(&self) -> f64 {
        self.log_amplitude.exp()
    }

    pub fn noise(&self) -> f64 {
        self.log_noise.exp()
    }

    /// Length of the flat parameter vector for `m` inducing points.
    pub fn flat_len(m: usize) -> usize {
        3 + 2 * m + m * (m + 1) / 2
    }

    /// `[log ℓ, log a, log σ, z.., m.., chol..]` with the Cholesky factor's
    /// lower triangle packed row by row and its diagonal stored as logs.
    pub fn to_flat(&self) -> Vec<f64> {
        let m = self.num_inducing();
        let mut out = Vec::with_capacity(Self::flat_len(m));
        out.extend([self.log_lengthscale, self.log_amplitude, self.log_noise]);
        out.extend_from_slice(&self.inducing);
        out.extend_from_slice(&self.var_mean);
        for i in 0..m {
            for j in 0..=i {
                let v = self.var_chol[[i, j]];
                out.push(if i == j { v.ln() } else { v });
            }
        }
        out
    }

    pub fn from_flat(m: usize, flat: &[f64]) -> Result<Self, GpError> {
        if flat.len() != Self::flat_len(m) || m == 0 {
            return Err(GpError::Shape(format!(
                "expected {} GP parameters for M = {m}, got {}",
                Self::flat_len(m),
                flat.len()
            )));
        }
        let mut chol = Array2::zeros((m, m));
        let mut k = 3 + 2 * m;
        for i in 0..m {
            for j in 0..=i {
                chol[[i, j]] = if i == j { flat[k].exp() } else { flat[k] };
                k += 1;
            }
        }
        Ok(Self {
            log_lengthscale: flat[0],
            log_amplitude: flat[1],
            log_noise: flat[2],
            inducing: flat[3..3 + m].to_vec(),
            var_mean: flat[3 + m..3 + 2 * m].to_vec(),
            var_chol: chol,
        })
    }
}

/// Accumulator for gradients in the flat layout of [`GpParams::to_flat`].
#[derive(Debug, Clone)]
pub(crate) struct GpGrad {
    pub log_lengthscale: f64,
    pub log_amplitude: f64,
    pub log_noise: f64,
    pub inducing: Vec<f64>,
    pub var_mean: Vec<f64>,
    /// Adjoint of the Cholesky factor entries (not the log-diagonal).
    pub var_chol: Array2<f64>,
}

impl GpGrad {
    pub fn zeros(m: usize) -> Self {
        Self {
            log_lengthscale: 0.0,
            log_amplitude: 0.0,
            log_noise: 0.0,
            inducing: vec![0.0; m],
            var_mean: vec![0.0; m],
            var_chol: Array2::zeros((m, m)),
        }
    }

    pub fn into_flat(self, params: &GpParams) -> Vec<f64> {
        let m = self.inducing.len();
        let mut out = Vec::with_capacity(GpParams::flat_len(m));
        out.extend([self.log_lengthscale, self.log_amplitude, self.log_noise]);
        out.extend_from_slice(&self.inducing);
        out.extend_from_slice(&self.var_mean);
        for i in 0..m {
            for j in 0..=i {
                let g = self.var_chol[[i, j]];
                out.push(if i == j { g * params.var_chol[[i, i]] } else { g });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let p = GpParams::init(24, &GpInit::default()).unwrap();
        assert_eq!(p.num_inducing(), 6);
        let flat = p.to_flat();
        assert_eq!(flat.len(), GpParams::flat_len(6));
        let q = GpParams::from_flat(6, &flat).unwrap();
        assert_eq!(q.inducing, p.inducing);
        for (a, b) in q.var_chol.iter().zip(p.var_chol.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        assert!(GpParams::from_flat(5, &flat).is_err());
    }

    #[test]
    fn default_inducing() {
        assert_eq!(default_inducing_count(4), 4);
        assert_eq!(default_inducing_count(24), 6);
        assert_eq!(default_inducing_count(96), 24);
    }
}
