use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    if grad.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(TrainError::LengthMismatch {
            params: params.len(),
            grad: grad.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// `base_scale * min(step^-1/2, step * warmup^-3/2)`: linear ramp up to
/// `warmup_steps`, inverse-square-root decay after.
pub fn warmup_lr(step: u64, warmup_steps: u64, base_scale: f64) -> f64 {
    let s = step.max(1) as f64;
    let w = warmup_steps.max(1) as f64;
    base_scale * s.powf(-0.5).min(s * w.powf(-1.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_magnitude() {
        for g in [3.0, -0.01, 1e-3] {
            let mut p = vec![0.0];
            let mut st = AdamState::new(1);
            let cfg = AdamConfig::default();
            adam_step(&mut p, &[g], &mut st, 0.05, &cfg).unwrap();
            let expected = 0.05 * g.abs() / (g.abs() + cfg.eps);
            assert!((p[0].abs() - expected).abs() < 1e-12);
            assert_eq!(p[0].signum(), -g.signum());
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(1);
        for _ in 0..200 {
            let g = vec![p[0]];
            adam_step(&mut p, &g, &mut st, 0.1, &AdamConfig::default()).unwrap();
        }
        assert!(p[0].abs() < 1e-2, "{}", p[0]);
    }

    #[test]
    fn length_mismatch() {
        let mut st = AdamState::new(2);
        assert!(matches!(
            adam_step(&mut [0.0, 0.0], &[1.0], &mut st, 0.1, &AdamConfig::default()),
            Err(TrainError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn warmup_shape() {
        let w = 1000;
        assert!((warmup_lr(w, w, 2.0) - 2.0 / (w as f64).sqrt()).abs() < 1e-15);
        assert!((warmup_lr(1, 1000, 1.0) - 1000f64.powf(-1.5)).abs() < 1e-18);
        let ratio = warmup_lr(2 * w, w, 1.0) / warmup_lr(w, w, 1.0);
        assert!((ratio - 0.5f64.sqrt()).abs() < 1e-12);
        let peak = warmup_lr(w, w, 1.0);
        for s in [1, 10, 999, 1001, 5000] {
            assert!(warmup_lr(s, w, 1.0) <= peak);
        }
    }
}
