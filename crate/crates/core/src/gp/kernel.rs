use ndarray::Array2;

use super::{GpError, GpGrad, GpParams};
use crate::numerics::{cho_solve, cholesky_default, LowerTriangular};

/// `t_i = i / tau` for `i in 0..tau`.
pub fn horizon_points(tau: usize) -> Vec<f64> {
    (0..tau).map(|i| i as f64 / tau as f64).collect()
}

/// `K[i, j] = a² exp(-(s_i - t_j)² / (2 ℓ²))`.
pub fn rbf_kernel(s: &[f64], t: &[f64], psi: &GpParams) -> Array2<f64> {
    let a2 = (2.0 * psi.log_amplitude).exp();
    let inv_2l2 = 0.5 * (-2.0 * psi.log_lengthscale).exp();
    Array2::from_shape_fn((s.len(), t.len()), |(i, j)| {
        let d = s[i] - t[j];
        a2 * (-d * d * inv_2l2).exp()
    })
}

/// Pieces of the inducing-point covariance reused by the backward pass.
pub(crate) struct Nystrom {
    pub kzz_factor: LowerTriangular,
    /// `K_zt`, `M x tau`.
    pub kzt: Array2<f64>,
    /// `K_zz⁻¹ K_zt`, `M x tau`.
    pub proj: Array2<f64>,
    /// `K_tz K_zz⁻¹ K_zt`.
    pub cov: Array2<f64>,
}

pub(crate) fn nystrom_parts(points: &[f64], psi: &GpParams) -> Result<Nystrom, GpError> {
    if points.is_empty() || psi.inducing.is_empty() {
        return Err(GpError::Shape(
            "need at least one horizon and one inducing point".into(),
        ));
    }
    let kzz = rbf_kernel(&psi.inducing, &psi.inducing, psi);
    let kzz_factor = cholesky_default(&kzz)?;
    let kzt = rbf_kernel(&psi.inducing, points, psi);
    let half = kzz_factor.solve_lower(&kzt.view());
    let cov = half.t().dot(&half);
    let proj = kzz_factor.solve_upper_t(&half.view());
    Ok(Nystrom {
        kzz_factor,
        kzt,
        proj,
        cov: crate::numerics::symmetrize(&cov),
    })
}

/// `K_tz K_zz⁻¹ K_zt` via a (jittered) Cholesky solve of `K_zz`.
pub fn nystrom_cov(points: &[f64], psi: &GpParams) -> Result<Array2<f64>, GpError> {
    Ok(nystrom_parts(points, psi)?.cov)
}

/// `nystrom_cov + σ² I`, the covariance of one blur channel.
pub fn blur_covariance(points: &[f64], psi: &GpParams) -> Result<Array2<f64>, GpError> {
    let mut cov = nystrom_cov(points, psi)?;
    let s2 = (2.0 * psi.log_noise).exp();
    cov.diag_mut().mapv_inplace(|v| v + s2);
    Ok(cov)
}

/// Chains an adjoint `k_bar` of `K = rbf(s, t)` into the kernel
/// hyperparameters and, optionally, the points on either side.
pub(crate) fn kernel_adjoint(
    s: &[f64],
    t: &[f64],
    psi: &GpParams,
    k_bar: &Array2<f64>,
    grad: &mut GpGrad,
    mut s_grad: Option<&mut [f64]>,
    mut t_grad: Option<&mut [f64]>,
) {
    let a2 = (2.0 * psi.log_amplitude).exp();
    let inv_l2 = (-2.0 * psi.log_lengthscale).exp();
    for (i, &si) in s.iter().enumerate() {
        for (j, &tj) in t.iter().enumerate() {
            let kb = k_bar[[i, j]];
            if kb == 0.0 {
                continue;
            }
            let d = si - tj;
            let k = a2 * (-0.5 * d * d * inv_l2).exp();
            grad.log_amplitude += kb * 2.0 * k;
            grad.log_lengthscale += kb * k * d * d * inv_l2;
            let dk_ds = -k * d * inv_l2;
            if let Some(g) = s_grad.as_deref_mut() {
                g[i] += kb * dk_ds;
            }
            if let Some(g) = t_grad.as_deref_mut() {
                g[j] -= kb * dk_ds;
            }
        }
    }
}

/// Chains the adjoint of `nystrom_cov + σ² I` into `grad`.
pub(crate) fn blur_covariance_adjoint(
    points: &[f64],
    psi: &GpParams,
    parts: &Nystrom,
    sigma_bar: &Array2<f64>,
    grad: &mut GpGrad,
) {
    // Q = K_tz B with B = K_zz⁻¹ K_zt:
    //   K̄_tz = 2 Σ̄ Bᵀ,  K̄_zz = -B Σ̄ Bᵀ   (Σ̄ symmetric)
    let sym = crate::numerics::symmetrize(sigma_bar);
    let b = &parts.proj;
    let sb = sym.dot(&b.t());
    let ktz_bar = &sb * 2.0;
    let kzz_bar = -b.dot(&sb);
    grad.log_noise += 2.0 * (2.0 * psi.log_noise).exp() * sym.diag().sum();
    let mut z_cross = vec![0.0; psi.num_inducing()];
    kernel_adjoint(points, &psi.inducing, psi, &ktz_bar, grad, None, Some(&mut z_cross));
    let mut z_left = vec![0.0; psi.num_inducing()];
    let mut z_right = vec![0.0; psi.num_inducing()];
    kernel_adjoint(
        &psi.inducing,
        &psi.inducing,
        psi,
        &kzz_bar,
        grad,
        Some(&mut z_left),
        Some(&mut z_right),
    );
    for (k, g) in grad.inducing.iter_mut().enumerate() {
        *g += z_cross[k] + z_left[k] + z_right[k];
    }
}

/// `K_zz⁻¹ X` for the jittered `K_zz`.
pub(crate) fn kzz_solve(parts: &Nystrom, x: &Array2<f64>) -> Array2<f64> {
    cho_solve(&parts.kzz_factor, &x.view())
}
