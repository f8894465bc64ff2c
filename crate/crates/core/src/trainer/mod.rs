//! Joint optimization of forecaster, blur and denoiser.
//!
//! The minimized batch objective is
//! `mean_w mse(y_d, y) - λ mean_w elbo(ψ; y_f)` with the ELBO evaluated on
//! the (gradient-blocked) forecasts, so the ELBO term only moves the GP
//! parameters. One Adam instance covers the concatenation `φ | ξ | ψ`.

mod adam;
mod checkpoint;

pub use adam::{adam_step, warmup_lr, AdamConfig, AdamState};
pub use checkpoint::{CheckpointError, CHECKPOINT_MAGIC};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backbone::{self, BackboneKind};
use crate::data::{Window, WindowSplit};
use crate::eval::mse;
use crate::gp::{self, GpInit, MAX_ISO_SIGMA};
use crate::numerics::RngStream;
use crate::pipeline::{
    pipeline_backward, pipeline_forward, BlurParams, Dims, Mode, PipelineError, PipelineParams, Variant,
};

/// RNG stream ids derived from the run seed.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const BLUR: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const RESIDUAL_INIT: u64 = 4;
    pub const RESIDUAL_SHUFFLE: u64 = 5;
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Gp(#[from] gp::GpError),
    #[error("training split is empty")]
    EmptySplit,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("parameter/gradient length mismatch: {params} vs {grad}")]
    LengthMismatch { params: usize, grad: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Sign convention for the ELBO term in the minimized loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElboSign {
    /// `loss = mse - λ·elbo`: the bound is maximized.
    Maximize,
    /// `loss = mse + λ·elbo`.
    Penalize,
}

/// Which epoch's parameters a run returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    BestValidation,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_steps: u64,
    pub base_scale: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    pub variant: Variant,
    pub backbone: BackboneKind,
    pub gp: GpInit,
    /// Initial isotropic blur scale for the DI variant.
    pub iso_sigma: f64,
    pub elbo_sign: ElboSign,
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.001,
            batch_size: 256,
            epochs: 50,
            warmup_steps: 1000,
            base_scale: 1.0,
            adam: AdamConfig::default(),
            seed: 0,
            variant: Variant::Dg,
            backbone: BackboneKind::LinearDirect,
            gp: GpInit::default(),
            iso_sigma: 0.05,
            elbo_sign: ElboSign::Maximize,
            selection: Selection::BestValidation,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.warmup_steps == 0 {
            return bad("warmup_steps must be >= 1");
        }
        if !(self.base_scale > 0.0) {
            return bad("base_scale must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the config's JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }

    /// The hidden-width x layer-count x warm-up grid explored by
    /// [`grid_search`]. Linear backbones only vary the warm-up.
    pub fn search_grid(&self) -> Vec<TrainConfig> {
        let kinds = match self.backbone {
            BackboneKind::LinearDirect => vec![BackboneKind::LinearDirect],
            BackboneKind::Mlp { .. } => BackboneKind::search_space(),
        };
        let mut out = Vec::new();
        for backbone in kinds {
            for warmup_steps in [1000, 8000] {
                out.push(TrainConfig {
                    backbone,
                    warmup_steps,
                    ..self.clone()
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean composite loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean per-window MSE of the training forwards (train-mode blur).
    pub train_mse: f64,
    /// Inference-mode MSE on the validation windows.
    pub val_mse: f64,
}

/// A trained (or initial) pipeline plus everything needed to resume or
/// audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: PipelineParams,
    pub adam: AdamState,
    /// Epoch the parameters come from; 0 means initialization.
    pub epoch: usize,
    pub history: Vec<EpochMetrics>,
}

impl Checkpoint {
    pub fn config_hash(&self) -> [u8; 32] {
        self.config.hash()
    }

    pub fn dims(&self) -> Dims {
        self.params.dims
    }

    /// Inference-mode forward of one window using the evaluation stream.
    pub fn eval_stream(&self) -> RngStream {
        RngStream::new(self.config.seed, streams::EVAL)
    }
}

/// `mean((y_d - y)²) - λ·elbo`.
pub fn composite_loss(y_d: &Array2<f64>, y: &Array2<f64>, elbo_value: f64, lambda: f64) -> f64 {
    mse(y, y_d).expect("shapes agree") - lambda * elbo_value
}

fn mean_mse(params: &PipelineParams, windows: &[Window], seed: u64) -> Result<f64, TrainError> {
    if windows.is_empty() {
        return Ok(f64::NAN);
    }
    let mut rng = RngStream::new(seed, streams::EVAL);
    let mut total = 0.0;
    for w in windows {
        let out = pipeline_forward(params, w, Mode::Infer, &mut rng)?;
        total += mse(&w.future, &out.y_d).expect("shapes agree");
    }
    Ok(total / windows.len() as f64)
}

struct RunOutcome {
    best: (PipelineParams, AdamState, usize),
    history: Vec<EpochMetrics>,
}

/// The shared epoch loop. `frozen_forecaster` zeroes the forecaster's
/// gradient (residual stage).
fn run_epochs(
    split: &WindowSplit,
    cfg: &TrainConfig,
    mut params: PipelineParams,
    frozen_forecaster: bool,
    shuffle_stream: u64,
    epoch_offset: usize,
) -> Result<RunOutcome, TrainError> {
    let n = split.train.len();
    let mut adam = AdamState::new(params.len());
    let mut shuffle = RngStream::new(cfg.seed, shuffle_stream);
    let mut blur_rng = RngStream::new(cfg.seed, streams::BLUR);
    let sign = match cfg.elbo_sign {
        ElboSign::Maximize => -1.0,
        ElboSign::Penalize => 1.0,
    };
    let use_elbo = cfg.lambda > 0.0 && params.variant.uses_gp();
    let points = gp::horizon_points(params.dims.tau);
    let mut flat = params.to_flat();
    let blur_range = params.blur_range();
    let phi_range = params.forecaster_range();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (params.clone(), adam.clone(), epoch_offset);
    let mut best_val = f64::INFINITY;
    if frozen_forecaster && cfg.selection == Selection::BestValidation && !split.validation.is_empty() {
        // A residual stage has to beat its own starting point (the zero head).
        best_val = mean_mse(&params, &split.validation, cfg.seed)?;
    }

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        shuffle.shuffle(&mut order);
        let (mut loss_sum, mut mse_sum) = (0.0, 0.0);
        let n_batches = order.len().div_ceil(cfg.batch_size);
        for (b_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; flat.len()];
            let mut batch_loss = 0.0;
            for &wi in batch {
                let w = &split.train[wi];
                let out = pipeline_forward(&params, w, Mode::Train, &mut blur_rng)?;
                let err = &out.y_d - &w.future;
                let entries = err.len() as f64;
                let window_mse = err.iter().map(|e| e * e).sum::<f64>() / entries;
                let loss_grad = err * (2.0 / entries);
                let g = pipeline_backward(&params, &out, &loss_grad)?.to_flat();
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += scale * v;
                }
                let mut elbo_value = 0.0;
                if use_elbo {
                    if let BlurParams::Gp(psi) = &params.blur {
                        elbo_value = gp::elbo(psi, &out.y_f, &points)?;
                        let ge = gp::elbo_backward(psi, &out.y_f, &points)?;
                        for (acc, v) in grad[blur_range.clone()].iter_mut().zip(&ge) {
                            *acc += scale * sign * cfg.lambda * v;
                        }
                    }
                }
                batch_loss += scale * (window_mse + sign * cfg.lambda * elbo_value);
                mse_sum += window_mse;
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFiniteLoss {
                    epoch: epoch + epoch_offset,
                    batch: b_idx + 1,
                });
            }
            if frozen_forecaster {
                grad[phi_range.clone()].fill(0.0);
            }
            let lr = warmup_lr(adam.step + 1, cfg.warmup_steps, cfg.base_scale);
            adam_step(&mut flat, &grad, &mut adam, lr, &cfg.adam)?;
            if let BlurParams::Isotropic(_) = params.blur {
                let s = &mut flat[blur_range.start];
                *s = s.clamp(0.0, MAX_ISO_SIGMA);
            }
            params.set_flat(&flat)?;
            loss_sum += batch_loss;
        }
        let val_mse = mean_mse(&params, &split.validation, cfg.seed)?;
        let metrics = EpochMetrics {
            epoch: epoch + epoch_offset,
            train_loss: loss_sum / n_batches as f64,
            train_mse: mse_sum / n as f64,
            val_mse,
        };
        history.push(metrics);
        let score = if val_mse.is_nan() { metrics.train_mse } else { val_mse };
        let take = match cfg.selection {
            Selection::BestValidation => score < best_val,
            Selection::Final => true,
        };
        if take {
            best_val = score;
            best = (params.clone(), adam.clone(), epoch + epoch_offset);
        }
    }
    Ok(RunOutcome { best, history })
}

fn dims_of(split: &WindowSplit) -> Result<Dims, TrainError> {
    let first = split.train.first().ok_or(TrainError::EmptySplit)?;
    let dims = Dims::of(first);
    let all = split.train.iter().chain(&split.validation).chain(&split.test);
    if all.clone().any(|w| Dims::of(w) != dims) {
        return Err(TrainError::InvalidConfig("windows have inconsistent shapes".into()));
    }
    Ok(dims)
}

/// Trains one variant. Residual boosting is dispatched to [`train_rb`].
pub fn train(split: &WindowSplit, cfg: &TrainConfig) -> Result<Checkpoint, TrainError> {
    cfg.validate()?;
    if cfg.variant == Variant::Rb {
        return train_rb(split, cfg);
    }
    let dims = dims_of(split)?;
    let params = PipelineParams::init(
        cfg.variant,
        cfg.backbone,
        dims,
        &cfg.gp,
        cfg.iso_sigma,
        &mut RngStream::new(cfg.seed, streams::INIT),
    )?;
    let outcome = run_epochs(split, cfg, params, false, streams::SHUFFLE, 0)?;
    let (params, adam, epoch) = outcome.best;
    Ok(Checkpoint {
        config: cfg.clone(),
        params,
        adam,
        epoch,
        history: outcome.history,
    })
}

/// Residual boosting: stage 1 fits the forecaster alone; stage 2 freezes
/// it and fits the denoiser to `y - y_f`, so `y_d = y_f + head`.
pub fn train_rb(split: &WindowSplit, cfg: &TrainConfig) -> Result<Checkpoint, TrainError> {
    cfg.validate()?;
    let dims = dims_of(split)?;
    let stage1_cfg = TrainConfig {
        variant: Variant::BackboneOnly,
        ..cfg.clone()
    };
    let base = PipelineParams::init(
        Variant::BackboneOnly,
        cfg.backbone,
        dims,
        &cfg.gp,
        cfg.iso_sigma,
        &mut RngStream::new(cfg.seed, streams::INIT),
    )?;
    let stage1 = run_epochs(split, &stage1_cfg, base, false, streams::SHUFFLE, 0)?;
    let forecaster = stage1.best.0.forecaster;
    let mut ckpt = train_residual_stage(split, cfg, forecaster, cfg.epochs)?;
    let mut history = stage1.history;
    history.append(&mut ckpt.history);
    ckpt.history = history;
    Ok(ckpt)
}

/// Stage 2 of residual boosting on a given (frozen) forecaster.
pub fn train_residual_stage(
    split: &WindowSplit,
    cfg: &TrainConfig,
    forecaster: backbone::ModelParams,
    epoch_offset: usize,
) -> Result<Checkpoint, TrainError> {
    let dims = dims_of(split)?;
    let mut denoiser = backbone::init_params(
        cfg.backbone,
        dims.kappa + dims.tau,
        dims.channels(),
        dims.tau,
        dims.d_y,
        &mut RngStream::new(cfg.seed, streams::RESIDUAL_INIT),
    )
    .map_err(PipelineError::from)?;
    // Zero output layer: boosting starts from the stage-1 forecast exactly.
    let last = denoiser
        .shapes
        .iter()
        .rev()
        .find(|(n, _)| n.starts_with('w'))
        .map(|(n, _)| n.clone());
    if let Some(t) = last.and_then(|n| denoiser.tensor_mut(&n)) {
        t.fill(0.0);
    }
    let params = PipelineParams {
        variant: Variant::Rb,
        dims,
        forecaster,
        denoiser: Some(denoiser),
        blur: BlurParams::None,
    };
    let cfg = TrainConfig {
        variant: Variant::Rb,
        ..cfg.clone()
    };
    let outcome = run_epochs(split, &cfg, params, true, streams::RESIDUAL_SHUFFLE, epoch_offset)?;
    let (params, adam, epoch) = outcome.best;
    Ok(Checkpoint {
        config: cfg,
        params,
        adam,
        epoch,
        history: outcome.history,
    })
}

/// Trains every cell of [`TrainConfig::search_grid`] and keeps the one with
/// the lowest best validation MSE.
pub fn grid_search(split: &WindowSplit, base: &TrainConfig) -> Result<Checkpoint, TrainError> {
    let mut best: Option<(f64, Checkpoint)> = None;
    for cfg in base.search_grid() {
        let ckpt = train(split, &cfg)?;
        let score = ckpt
            .history
            .iter()
            .find(|m| m.epoch == ckpt.epoch)
            .map_or(f64::INFINITY, |m| m.val_mse);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, ckpt));
        }
    }
    best.map(|(_, c)| c).ok_or(TrainError::EmptySplit)
}
