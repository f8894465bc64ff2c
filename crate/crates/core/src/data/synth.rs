use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DataError, RawSeries};
use crate::numerics::{NoiseSource, RngStream};

/// Two sinusoids at well-separated periods plus AR(1) noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub length: usize,
    pub coarse_period: f64,
    pub coarse_amp: f64,
    pub fine_period: f64,
    pub fine_amp: f64,
    pub ar_coeff: f64,
    pub ar_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            length: 3000,
            coarse_period: 96.0,
            coarse_amp: 1.0,
            fine_period: 8.0,
            fine_amp: 0.3,
            ar_coeff: 0.5,
            ar_std: 0.05,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        if !(self.fine_period > 0.0 && self.coarse_period.is_finite()) {
            return bad("periods must be positive and finite".into());
        }
        if !(self.fine_period < self.coarse_period) {
            return bad(format!(
                "fine_period ({}) must be smaller than coarse_period ({})",
                self.fine_period, self.coarse_period
            ));
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return bad(format!("ar_coeff must lie in [0, 1), got {}", self.ar_coeff));
        }
        if !(self.ar_std >= 0.0 && self.coarse_amp.is_finite() && self.fine_amp.is_finite()) {
            return bad("amplitudes must be finite and ar_std non-negative".into());
        }
        if self.length < 2 {
            return bad(format!("length must be at least 2, got {}", self.length));
        }
        Ok(())
    }

    /// The windowing constraint `length >= kappa + tau + 1`.
    pub fn validate_for(&self, kappa: usize, tau: usize) -> Result<(), DataError> {
        self.validate()?;
        if self.length < kappa + tau + 1 {
            return Err(DataError::InvalidConfig(format!(
                "length ({}) must be at least kappa + tau + 1 = {}",
                self.length,
                kappa + tau + 1
            )));
        }
        Ok(())
    }
}

pub const SYNTH_FEATURES: [&str; 4] = ["sin_coarse", "cos_coarse", "sin_fine", "cos_fine"];

/// `y[t] = coarse_amp sin(2πt/coarse_period) + fine_amp sin(2πt/fine_period) + e[t]`
/// with `e[t] = ar_coeff e[t-1] + ar_std z[t]`, `e[-1] = 0`. Features are the
/// sin/cos encodings of `t` at both periods.
pub fn synth_multiscale(cfg: &SynthConfig) -> Result<RawSeries, DataError> {
    cfg.validate()?;
    let n = cfg.length;
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut features = Array2::zeros((n, SYNTH_FEATURES.len()));
    let mut targets = Array2::zeros((n, 1));
    let mut ar = 0.0;
    for t in 0..n {
        let tf = t as f64;
        let wc = 2.0 * PI * tf / cfg.coarse_period;
        let wf = 2.0 * PI * tf / cfg.fine_period;
        ar = cfg.ar_coeff * ar + cfg.ar_std * rng.standard_normal();
        targets[[t, 0]] = cfg.coarse_amp * wc.sin() + cfg.fine_amp * wf.sin() + ar;
        features[[t, 0]] = wc.sin();
        features[[t, 1]] = wc.cos();
        features[[t, 2]] = wf.sin();
        features[[t, 3]] = wf.cos();
    }
    RawSeries::new(
        (0..n as i64).collect(),
        SYNTH_FEATURES.iter().map(|s| s.to_string()).collect(),
        vec!["y".to_string()],
        features,
        targets,
    )
}
