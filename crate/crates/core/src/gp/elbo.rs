use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use super::kernel::{kernel_adjoint, kzz_solve, nystrom_parts, Nystrom};
use super::{GpError, GpGrad, GpParams};
use crate::numerics::LowerTriangular;

struct Terms {
    parts: Nystrom,
    s_factor: LowerTriangular,
    s: Array2<f64>,
    mean: Array1<f64>,
    mu: Array1<f64>,
    var_sum: f64,
    value: f64,
}

fn check(obs: &Array2<f64>, points: &[f64]) -> Result<(), GpError> {
    if obs.nrows() != points.len() || obs.ncols() == 0 {
        return Err(GpError::Shape(format!(
            "observations are {:?} but there are {} horizon points",
            obs.dim(),
            points.len()
        )));
    }
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(GpError::Shape("observations contain non-finite values".into()));
    }
    Ok(())
}

fn terms(psi: &GpParams, obs: &Array2<f64>, points: &[f64]) -> Result<Terms, GpError> {
    check(obs, points)?;
    let m = psi.num_inducing();
    if psi.var_mean.len() != m || psi.var_chol.dim() != (m, m) {
        return Err(GpError::Shape(
            "variational parameters do not match inducing count".into(),
        ));
    }
    let (tau, d_y) = obs.dim();
    let parts = nystrom_parts(points, psi)?;
    let s_factor = LowerTriangular::new(psi.var_chol.clone())
        .map_err(|_| GpError::Invalid("var_chol must have a positive diagonal".into()))?;
    let s = s_factor.reconstruct();
    let mean = Array1::from(psi.var_mean.clone());
    let mu = parts.proj.t().dot(&mean);

    let a2 = (2.0 * psi.log_amplitude).exp();
    let s2 = (2.0 * psi.log_noise).exp();
    // Σ_i v_i = τ a² - tr(K_zt ᵀ B) + tr(Bᵀ S B)
    let sb = s.dot(&parts.proj);
    let var_sum = tau as f64 * a2 - (&parts.kzt * &parts.proj).sum() + (&parts.proj * &sb).sum();

    let mut sq = 0.0;
    for c in 0..d_y {
        for i in 0..tau {
            let r = obs[[i, c]] - mu[i];
            sq += r * r;
        }
    }
    let n = (tau * d_y) as f64;
    let data = -0.5 * n * (2.0 * PI).ln() - n * psi.log_noise - sq / (2.0 * s2) - d_y as f64 * var_sum / (2.0 * s2);

    // KL(N(m, S) ‖ N(0, K_zz))
    let kzz_inv_s = kzz_solve(&parts, &s);
    let kzz_inv_m = kzz_solve(&parts, &mean.clone().insert_axis(ndarray::Axis(1)));
    let kl = 0.5
        * (kzz_inv_s.diag().sum() + mean.dot(&kzz_inv_m.column(0)) - m as f64 + parts.kzz_factor.log_det()
            - s_factor.log_det());
    let value = data - d_y as f64 * kl;
    Ok(Terms {
        parts,
        s_factor,
        s,
        mean,
        mu,
        var_sum,
        value,
    })
}

/// Sparse variational evidence lower bound with a Gaussian likelihood,
/// summed over target channels (all channels share one variational
/// distribution):
///
/// `Σ_c Σ_i [log N(obs_ic | μ_i, σ²) - v_i / (2σ²)] - d_y KL(q(u) ‖ p(u))`
///
/// where `μ = K_tz K_zz⁻¹ m` and `v_i` is the marginal variance gap
/// `K_ii - Q_ii + (A S Aᵀ)_ii`.
pub fn elbo(psi: &GpParams, obs: &Array2<f64>, points: &[f64]) -> Result<f64, GpError> {
    Ok(terms(psi, obs, points)?.value)
}

/// Exact gradient of [`elbo`] in [`GpParams::to_flat`] layout.
pub fn elbo_backward(psi: &GpParams, obs: &Array2<f64>, points: &[f64]) -> Result<Vec<f64>, GpError> {
    let t = terms(psi, obs, points)?;
    let (tau, d_y) = obs.dim();
    let dy = d_y as f64;
    let m = psi.num_inducing();
    let s2 = (2.0 * psi.log_noise).exp();
    let a2 = (2.0 * psi.log_amplitude).exp();
    let b = &t.parts.proj;
    let mut grad = GpGrad::zeros(m);

    // Data term.
    let mut mu_bar = Array1::<f64>::zeros(tau);
    let mut sq = 0.0;
    for c in 0..d_y {
        for i in 0..tau {
            let r = obs[[i, c]] - t.mu[i];
            mu_bar[i] += r / s2;
            sq += r * r;
        }
    }
    let v_bar = -dy / (2.0 * s2);
    grad.log_noise += -((tau * d_y) as f64) + sq / s2 + dy * t.var_sum / s2;
    grad.log_amplitude += v_bar * tau as f64 * 2.0 * a2;

    // μ = Bᵀ m
    let mut m_bar = b.dot(&mu_bar);
    let mut b_bar = outer(&t.mean, &mu_bar);
    // Σv = τa² - ⟨K_zt, B⟩ + ⟨B, S B⟩
    b_bar = b_bar + (&(t.s.dot(b) * 2.0) - &t.parts.kzt) * v_bar;
    let mut kzt_bar = b * (-v_bar);
    let mut s_bar = b.dot(&b.t()) * v_bar;

    // B = K_zz⁻¹ K_zt
    kzt_bar = kzt_bar + kzz_solve(&t.parts, &b_bar);
    let mut kzz_bar = -kzz_solve(&t.parts, &b_bar).dot(&b.t());

    // -d_y KL
    let kzz_inv = t.parts.kzz_factor.inverse();
    let kzz_inv_m = kzz_inv.dot(&t.mean);
    let kzz_inv_s_kzz_inv = kzz_inv.dot(&t.s).dot(&kzz_inv);
    let kl_kzz = (&kzz_inv - &kzz_inv_s_kzz_inv - outer(&kzz_inv_m, &kzz_inv_m)) * 0.5;
    kzz_bar = kzz_bar - kl_kzz * dy;
    s_bar = s_bar - (&kzz_inv - &t.s_factor.inverse()) * (0.5 * dy);
    m_bar = m_bar - kzz_inv_m * dy;

    // S = L Lᵀ
    let l_bar = (&s_bar + &s_bar.t()).dot(t.s_factor.matrix());
    for i in 0..m {
        for j in 0..=i {
            grad.var_chol[[i, j]] = l_bar[[i, j]];
        }
    }
    grad.var_mean = m_bar.to_vec();

    // Kernel matrices.
    let mut z_cross = vec![0.0; m];
    kernel_adjoint(
        &psi.inducing,
        points,
        psi,
        &kzt_bar,
        &mut grad,
        Some(&mut z_cross),
        None,
    );
    let mut z_left = vec![0.0; m];
    let mut z_right = vec![0.0; m];
    kernel_adjoint(
        &psi.inducing,
        &psi.inducing,
        psi,
        &kzz_bar,
        &mut grad,
        Some(&mut z_left),
        Some(&mut z_right),
    );
    for k in 0..m {
        grad.inducing[k] += z_cross[k] + z_left[k] + z_right[k];
    }
    Ok(grad.into_flat(psi))
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}
