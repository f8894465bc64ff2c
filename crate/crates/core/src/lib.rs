//! Forecast, blur, denoise.
//!
//! A forecasting backbone produces a coarse prediction `y_f`, a learnable
//! Gaussian-process blur corrupts it with smooth, temporally correlated noise
//! to give `y_b`, and a denoiser (a second backbone with its own parameters)
//! reconstructs the final forecast `y_d`. All three parts train jointly under
//! `mse(y_d, y) - lambda * elbo`.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: CSV ingestion, synthetic multi-scale series, z-scoring,
//!   windowing and temporal splits.
//! * [`numerics`]: jittered Cholesky, seeded RNG streams, reparameterized
//!   multivariate-normal draws, finite-difference gradient checks.
//! * [`backbone`]: `LinearDirect` and `Mlp` forecasters with exact
//!   hand-written gradients.
//! * [`gp`]: RBF kernel, inducing-point covariance, blur sampling and its
//!   gradient, sparse variational ELBO and its gradient, isotropic blur.
//! * [`pipeline`]: the six variants and end-to-end backpropagation.
//! * [`trainer`]: composite loss, Adam, warm-up schedule, training loops and
//!   checkpoints.
//! * [`eval`]: metrics, multi-seed aggregation and report emission.
//! * [`gradcheck`]: the finite-difference suite behind `fbd gradcheck`.

pub mod backbone;
pub mod data;
pub mod eval;
pub mod gp;
pub mod gradcheck;
pub mod numerics;
pub mod pipeline;
pub mod trainer;

pub use backbone::{BackboneKind, ModelParams};
pub use data::{NormStats, RawSeries, SynthConfig, Window, WindowSplit};
pub use gp::{BlurDraw, GpParams};
pub use numerics::{LowerTriangular, RngStream};
pub use pipeline::{Mode, PipelineOutput, PipelineParams, Variant};
pub use trainer::{Checkpoint, TrainConfig};
