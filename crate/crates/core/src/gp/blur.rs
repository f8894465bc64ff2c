use ndarray::Array2;

use super::kernel::{blur_covariance_adjoint, nystrom_parts};
use super::{GpError, GpGrad, GpParams};
use crate::numerics::{cholesky_backward, cholesky_default, LowerTriangular, NoiseSource};

/// Upper clamp of the isotropic blur scale.
pub const MAX_ISO_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum BlurFactor {
    /// Cholesky factor of the GP blur covariance.
    Gp(LowerTriangular),
    /// `σ I` for the isotropic blur, after clamping.
    Isotropic(f64),
}

/// One blur realization: `blurred[:, c] = y_f[:, c] + factor · eps[:, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurDraw {
    pub blurred: Array2<f64>,
    pub eps: Array2<f64>,
    pub factor: BlurFactor,
}

fn draw_eps(shape: (usize, usize), noise: &mut impl NoiseSource) -> Array2<f64> {
    // Column-major fill: each channel's tau draws are consecutive.
    let mut eps = Array2::zeros(shape);
    for c in 0..shape.1 {
        for i in 0..shape.0 {
            eps[[i, c]] = noise.standard_normal();
        }
    }
    eps
}

/// Draws `Y_B ~ N(Y_F, K_tz K_zz⁻¹ K_zt + σ² I)` independently per channel.
pub fn sample_blur(y_f: &Array2<f64>, psi: &GpParams, noise: &mut impl NoiseSource) -> Result<BlurDraw, GpError> {
    if y_f.iter().any(|v| !v.is_finite()) {
        return Err(GpError::Shape("forecast contains non-finite values".into()));
    }
    let points = super::horizon_points(y_f.nrows());
    let mut cov = nystrom_parts(&points, psi)?.cov;
    let s2 = (2.0 * psi.log_noise).exp();
    cov.diag_mut().mapv_inplace(|v| v + s2);
    let factor = cholesky_default(&cov)?;
    let eps = draw_eps(y_f.dim(), noise);
    let blurred = y_f + &factor.matrix().dot(&eps);
    Ok(BlurDraw {
        blurred,
        eps,
        factor: BlurFactor::Gp(factor),
    })
}

/// Gradients of `⟨upstream, Y_B⟩` with `eps` held fixed.
///
/// Returns the flat gradient in [`GpParams::to_flat`] layout and the
/// gradient with respect to `y_f`, which is `upstream` itself.
pub fn blur_backward(
    draw: &BlurDraw,
    upstream: &Array2<f64>,
    psi: &GpParams,
    y_f: &Array2<f64>,
) -> Result<(Vec<f64>, Array2<f64>), GpError> {
    let BlurFactor::Gp(factor) = &draw.factor else {
        return Err(GpError::StaleDraw);
    };
    let tau = y_f.nrows();
    if draw.eps.dim() != y_f.dim() || upstream.dim() != y_f.dim() || factor.dim() != tau {
        return Err(GpError::StaleDraw);
    }
    let points = super::horizon_points(tau);
    let parts = nystrom_parts(&points, psi)?;
    let mut cov = parts.cov.clone();
    let s2 = (2.0 * psi.log_noise).exp();
    cov.diag_mut().mapv_inplace(|v| v + s2);
    let refactored = cholesky_default(&cov)?;
    if &refactored != factor {
        return Err(GpError::StaleDraw);
    }
    // L̄ = U εᵀ restricted to the lower triangle.
    let mut l_bar = upstream.dot(&draw.eps.t());
    for i in 0..tau {
        for j in (i + 1)..tau {
            l_bar[[i, j]] = 0.0;
        }
    }
    let sigma_bar = cholesky_backward(factor, &l_bar);
    let mut grad = GpGrad::zeros(psi.num_inducing());
    blur_covariance_adjoint(&points, psi, &parts, &sigma_bar, &mut grad);
    Ok((grad.into_flat(psi), upstream.clone()))
}

/// `Y_B = Y_F + σ ε` with `σ` clamped to `[0, MAX_ISO_SIGMA]`.
pub fn isotropic_blur(y_f: &Array2<f64>, sigma: f64, noise: &mut impl NoiseSource) -> BlurDraw {
    let sigma = sigma.clamp(0.0, MAX_ISO_SIGMA);
    let eps = draw_eps(y_f.dim(), noise);
    BlurDraw {
        blurred: y_f + &(&eps * sigma),
        eps,
        factor: BlurFactor::Isotropic(sigma),
    }
}

/// Gradient of `⟨upstream, Y_B⟩` with respect to the unclamped `sigma`;
/// zero outside the clamp interval.
pub fn isotropic_blur_backward(draw: &BlurDraw, upstream: &Array2<f64>, sigma: f64) -> f64 {
    if !(0.0..=MAX_ISO_SIGMA).contains(&sigma) {
        return 0.0;
    }
    (upstream * &draw.eps).sum()
}
