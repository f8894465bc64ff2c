//! Forecaster → blur → denoiser composition for each ablation variant.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::{self, BackboneError, BackboneKind, ForwardCache, ModelParams};
use crate::data::Window;
use crate::gp::{self, BlurDraw, GpError, GpInit, GpParams, MAX_ISO_SIGMA};
use crate::numerics::{NoiseSource, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Backbone(#[from] BackboneError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pipeline output does not belong to these parameters")]
    StaleCache,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Forecaster alone.
    #[serde(rename = "backbone", alias = "backbone_only")]
    BackboneOnly,
    /// GP blur between forecaster and denoiser, at train and inference time.
    Dg,
    /// Isotropic Gaussian blur instead of the GP blur.
    Di,
    /// Denoiser applied directly to the forecast, no blur.
    #[serde(alias = "dwc")]
    Dwb,
    /// Residual boosting: a second model fit to the frozen forecaster's errors.
    Rb,
    /// GP blur during training only.
    Dt,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::BackboneOnly,
        Variant::Dg,
        Variant::Di,
        Variant::Dwb,
        Variant::Rb,
        Variant::Dt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::BackboneOnly => "backbone",
            Variant::Dg => "dg",
            Variant::Di => "di",
            Variant::Dwb => "dwb",
            Variant::Rb => "rb",
            Variant::Dt => "dt",
        }
    }

    pub fn uses_gp(self) -> bool {
        matches!(self, Variant::Dg | Variant::Dt)
    }

    pub fn has_denoiser(self) -> bool {
        self != Variant::BackboneOnly
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == lower)
            .or(match lower.as_str() {
                "backbone_only" | "backboneonly" => Some(Variant::BackboneOnly),
                "dwc" => Some(Variant::Dwb),
                _ => None,
            })
            .ok_or_else(|| format!("unknown variant {s:?} (expected one of backbone, dg, di, dwb, rb, dt)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Infer,
}

/// Window geometry shared by every model in a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub kappa: usize,
    pub tau: usize,
    pub d_x: usize,
    pub d_y: usize,
}

impl Dims {
    pub fn of(window: &Window) -> Self {
        Self {
            kappa: window.kappa(),
            tau: window.tau(),
            d_x: window.n_features(),
            d_y: window.n_targets(),
        }
    }

    pub fn channels(&self) -> usize {
        self.d_x + self.d_y
    }

    fn check(&self, window: &Window) -> Result<(), PipelineError> {
        let got = Dims::of(window);
        if got != *self || window.history.ncols() != self.channels() {
            return Err(PipelineError::DimensionMismatch(format!(
                "model expects {self:?}, window has {got:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlurParams {
    None,
    Gp(GpParams),
    /// Unclamped isotropic scale; clamped to `[0, 0.1]` when used.
    Isotropic(f64),
}

impl BlurParams {
    pub fn len(&self) -> usize {
        match self {
            BlurParams::None => 0,
            BlurParams::Gp(p) => GpParams::flat_len(p.num_inducing()),
            BlurParams::Isotropic(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            BlurParams::None => vec![],
            BlurParams::Gp(p) => p.to_flat(),
            BlurParams::Isotropic(s) => vec![*s],
        }
    }
}

/// Everything a variant trains: forecaster φ, denoiser ξ, blur ψ or σ.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub variant: Variant,
    pub dims: Dims,
    pub forecaster: ModelParams,
    pub denoiser: Option<ModelParams>,
    pub blur: BlurParams,
}

impl PipelineParams {
    /// Fresh parameters. The denoiser shares the forecaster's kind and sees
    /// `kappa + tau` rows of `d_x + d_y` channels.
    pub fn init(
        variant: Variant,
        kind: BackboneKind,
        dims: Dims,
        gp_init: &GpInit,
        iso_sigma: f64,
        rng: &mut RngStream,
    ) -> Result<Self, PipelineError> {
        let forecaster = backbone::init_params(kind, dims.kappa, dims.channels(), dims.tau, dims.d_y, rng)?;
        let denoiser = if variant.has_denoiser() {
            Some(backbone::init_params(
                kind,
                dims.kappa + dims.tau,
                dims.channels(),
                dims.tau,
                dims.d_y,
                rng,
            )?)
        } else {
            None
        };
        let blur = match variant {
            Variant::Dg | Variant::Dt => BlurParams::Gp(GpParams::init(dims.tau, gp_init)?),
            Variant::Di => BlurParams::Isotropic(iso_sigma.clamp(0.0, MAX_ISO_SIGMA)),
            _ => BlurParams::None,
        };
        Ok(Self {
            variant,
            dims,
            forecaster,
            denoiser,
            blur,
        })
    }

    pub fn len(&self) -> usize {
        self.forecaster.len() + self.denoiser.as_ref().map_or(0, |d| d.len()) + self.blur.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `φ | ξ | blur`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.forecaster.values);
        if let Some(d) = &self.denoiser {
            out.extend_from_slice(&d.values);
        }
        out.extend(self.blur.to_flat());
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), PipelineError> {
        if flat.len() != self.len() {
            return Err(PipelineError::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.len(),
                flat.len()
            )));
        }
        let nf = self.forecaster.len();
        self.forecaster.values.copy_from_slice(&flat[..nf]);
        let mut off = nf;
        if let Some(d) = &mut self.denoiser {
            let nd = d.len();
            d.values.copy_from_slice(&flat[off..off + nd]);
            off += nd;
        }
        let rest = &flat[off..];
        self.blur = match &self.blur {
            BlurParams::None => BlurParams::None,
            BlurParams::Gp(p) => BlurParams::Gp(GpParams::from_flat(p.num_inducing(), rest)?),
            BlurParams::Isotropic(_) => BlurParams::Isotropic(rest[0]),
        };
        Ok(())
    }

    /// Index range of the forecaster inside [`Self::to_flat`].
    pub fn forecaster_range(&self) -> std::ops::Range<usize> {
        0..self.forecaster.len()
    }

    /// Index range of the blur parameters inside [`Self::to_flat`].
    pub fn blur_range(&self) -> std::ops::Range<usize> {
        let end = self.len();
        end - self.blur.len()..end
    }
}

/// State kept for [`pipeline_backward`].
#[derive(Debug, Clone)]
pub struct PipelineCache {
    variant: Variant,
    forecaster: ForwardCache,
    denoiser: Option<ForwardCache>,
    blur: Option<BlurDraw>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub y_f: Array2<f64>,
    pub y_b: Option<Array2<f64>>,
    pub y_d: Array2<f64>,
    pub cache: PipelineCache,
}

/// Denoiser input: the window history followed by `tau` rows holding the
/// future covariates and `y_b` in the target columns.
pub fn denoiser_input(window: &Window, y_b: &Array2<f64>) -> Result<Array2<f64>, PipelineError> {
    let (kappa, tau, d_x) = (window.kappa(), window.tau(), window.n_features());
    if y_b.dim() != (tau, window.n_targets()) {
        return Err(PipelineError::DimensionMismatch(format!(
            "blurred forecast is {:?}, window future is {:?}",
            y_b.dim(),
            window.future.dim()
        )));
    }
    let mut out = Array2::zeros((kappa + tau, window.history.ncols()));
    out.slice_mut(s![..kappa, ..]).assign(&window.history);
    out.slice_mut(s![kappa.., ..d_x]).assign(&window.future_features);
    out.slice_mut(s![kappa.., d_x..]).assign(y_b);
    Ok(out)
}

pub fn pipeline_forward(
    params: &PipelineParams,
    window: &Window,
    mode: Mode,
    noise: &mut impl NoiseSource,
) -> Result<PipelineOutput, PipelineError> {
    params.dims.check(window)?;
    let (y_f, f_cache) = backbone::forward(&params.forecaster, &window.history.view())?;
    let variant = params.variant;
    let blur_on = match variant {
        Variant::Dg | Variant::Di => true,
        Variant::Dt => mode == Mode::Train,
        _ => false,
    };
    let draw = if blur_on {
        Some(match &params.blur {
            BlurParams::Gp(psi) => gp::sample_blur(&y_f, psi, noise)?,
            BlurParams::Isotropic(sigma) => gp::isotropic_blur(&y_f, *sigma, noise),
            BlurParams::None => return Err(PipelineError::StaleCache),
        })
    } else {
        None
    };
    let Some(denoiser) = &params.denoiser else {
        return Ok(PipelineOutput {
            y_d: y_f.clone(),
            y_f,
            y_b: None,
            cache: PipelineCache {
                variant,
                forecaster: f_cache,
                denoiser: None,
                blur: None,
            },
        });
    };
    let y_b = match &draw {
        Some(d) => d.blurred.clone(),
        None => y_f.clone(),
    };
    let input = denoiser_input(window, &y_b)?;
    let (head, d_cache) = backbone::forward(denoiser, &input.view())?;
    let (y_d, y_b) = if variant == Variant::Rb {
        (&y_f + &head, None)
    } else {
        (head, Some(y_b))
    };
    Ok(PipelineOutput {
        y_f,
        y_b,
        y_d,
        cache: PipelineCache {
            variant,
            forecaster: f_cache,
            denoiser: Some(d_cache),
            blur: draw,
        },
    })
}

/// Gradients with respect to each parameter group, laid out like
/// [`PipelineParams::to_flat`] when concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineGrad {
    pub forecaster: Vec<f64>,
    pub denoiser: Vec<f64>,
    pub blur: Vec<f64>,
}

impl PipelineGrad {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.forecaster.len() + self.denoiser.len() + self.blur.len());
        out.extend_from_slice(&self.forecaster);
        out.extend_from_slice(&self.denoiser);
        out.extend_from_slice(&self.blur);
        out
    }
}

/// Backpropagates `loss_grad = ∂loss/∂y_d` through denoiser, blur and
/// forecaster. For residual boosting the forecaster receives only the
/// direct `y_d = y_f + ...` path.
pub fn pipeline_backward(
    params: &PipelineParams,
    output: &PipelineOutput,
    loss_grad: &Array2<f64>,
) -> Result<PipelineGrad, PipelineError> {
    let cache = &output.cache;
    if cache.variant != params.variant || loss_grad.dim() != output.y_d.dim() {
        return Err(PipelineError::StaleCache);
    }
    let kappa = params.dims.kappa;
    let d_x = params.dims.d_x;
    let (denoiser_grad, gy_f, blur_grad) = match (&params.denoiser, &cache.denoiser) {
        (None, None) => (vec![], loss_grad.clone(), vec![0.0; params.blur.len()]),
        (Some(denoiser), Some(d_cache)) => {
            let (g_xi, g_in) = backbone::backward(denoiser, d_cache, &loss_grad.view())?;
            let gy_b = g_in.slice(s![kappa.., d_x..]).to_owned();
            match (params.variant, &cache.blur, &params.blur) {
                (Variant::Rb, _, _) => (g_xi, loss_grad.clone(), vec![]),
                (_, Some(draw), BlurParams::Gp(psi)) => {
                    let (g_psi, gy_f) = gp::blur_backward(draw, &gy_b, psi, &output.y_f)?;
                    (g_xi, gy_f, g_psi)
                }
                (_, Some(draw), BlurParams::Isotropic(sigma)) => {
                    let g_sigma = gp::isotropic_blur_backward(draw, &gy_b, *sigma);
                    (g_xi, gy_b, vec![g_sigma])
                }
                (_, None, blur) => (g_xi, gy_b, vec![0.0; blur.len()]),
                (_, Some(_), BlurParams::None) => return Err(PipelineError::StaleCache),
            }
        }
        _ => return Err(PipelineError::StaleCache),
    };
    let (g_phi, _) = backbone::backward(&params.forecaster, &cache.forecaster, &gy_f.view())?;
    Ok(PipelineGrad {
        forecaster: g_phi,
        denoiser: denoiser_grad,
        blur: blur_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, ZeroNoise};
    use proptest::prelude::*;

    pub(crate) fn toy_window(kappa: usize, tau: usize, d_x: usize, d_y: usize, seed: u64) -> Window {
        let mut rng = RngStream::new(seed, 50);
        let mut u = |r, c| Array2::from_shape_fn((r, c), |_| rng.uniform(-1.0, 1.0));
        Window {
            cutoff: kappa,
            history: u(kappa, d_x + d_y),
            future_features: u(tau, d_x),
            future: u(tau, d_y),
        }
    }

    fn params(variant: Variant, kind: BackboneKind, dims: Dims, seed: u64) -> PipelineParams {
        let gp_init = GpInit {
            inducing: Some(2),
            ..GpInit::default()
        };
        PipelineParams::init(variant, kind, dims, &gp_init, 0.05, &mut RngStream::new(seed, 0)).unwrap()
    }

    /// Linear denoiser that copies the `y_b` block to its output.
    fn identity_on_blurred(dims: Dims) -> ModelParams {
        let mut p = ModelParams::zeros(
            BackboneKind::LinearDirect,
            dims.kappa + dims.tau,
            dims.channels(),
            dims.tau,
            dims.d_y,
        )
        .unwrap();
        let out_cols = dims.tau * dims.d_y;
        let w = p.tensor_mut("w").unwrap();
        for i in 0..dims.tau {
            for c in 0..dims.d_y {
                let row = (dims.kappa + i) * dims.channels() + dims.d_x + c;
                w[row * out_cols + i * dims.d_y + c] = 1.0;
            }
        }
        p
    }

    const DIMS: Dims = Dims {
        kappa: 8,
        tau: 4,
        d_x: 1,
        d_y: 1,
    };

    #[test]
    fn backbone_only_contract() {
        let p = params(Variant::BackboneOnly, BackboneKind::LinearDirect, DIMS, 1);
        let w = toy_window(8, 4, 1, 1, 2);
        let out = pipeline_forward(&p, &w, Mode::Train, &mut RngStream::new(1, 2)).unwrap();
        assert_eq!(out.y_d, out.y_f);
        assert!(out.y_b.is_none());
        let g = pipeline_backward(&p, &out, &Array2::ones((4, 1))).unwrap();
        assert!(g.denoiser.is_empty() && g.blur.is_empty());
    }

    #[test]
    fn dg_identity_composition() {
        let mut p = params(Variant::Dg, BackboneKind::LinearDirect, DIMS, 1);
        p.denoiser = Some(identity_on_blurred(DIMS));
        let w = toy_window(8, 4, 1, 1, 3);
        let out = pipeline_forward(&p, &w, Mode::Train, &mut ZeroNoise).unwrap();
        assert_eq!(out.y_b.as_ref().unwrap(), &out.y_f);
        assert_eq!(out.y_d, out.y_f);
    }

    #[test]
    fn dt_blurs_only_in_training() {
        let p = params(Variant::Dt, BackboneKind::LinearDirect, DIMS, 1);
        let w = toy_window(8, 4, 1, 1, 4);
        let train = pipeline_forward(&p, &w, Mode::Train, &mut RngStream::new(9, 2)).unwrap();
        let infer = pipeline_forward(&p, &w, Mode::Infer, &mut RngStream::new(9, 2)).unwrap();
        assert_ne!(train.y_b, infer.y_b);
        assert_eq!(infer.y_b.unwrap(), infer.y_f);
    }

    #[test]
    fn fresh_blur_per_forward() {
        let p = params(Variant::Dg, BackboneKind::LinearDirect, DIMS, 1);
        let w = toy_window(8, 4, 1, 1, 5);
        let mut rng = RngStream::new(3, 2);
        let a = pipeline_forward(&p, &w, Mode::Train, &mut rng).unwrap();
        let b = pipeline_forward(&p, &w, Mode::Train, &mut rng).unwrap();
        assert_ne!(a.y_b, b.y_b);
    }

    #[test]
    fn denoiser_input_layout() {
        let w = Window {
            cutoff: 2,
            history: ndarray::arr2(&[[1.0, 10.0], [2.0, 20.0]]),
            future_features: ndarray::arr2(&[[3.0]]),
            future: ndarray::arr2(&[[30.0]]),
        };
        let x = denoiser_input(&w, &ndarray::arr2(&[[-7.0]])).unwrap();
        assert_eq!(x, ndarray::arr2(&[[1.0, 10.0], [2.0, 20.0], [3.0, -7.0]]));
        let oracle = denoiser_input(&w, &w.future).unwrap();
        assert_eq!(oracle[[2, 1]], 30.0);
        assert!(denoiser_input(&w, &Array2::zeros((2, 1))).is_err());
    }

    #[test]
    fn denoiser_input_sensitivity() {
        let w = toy_window(5, 3, 2, 2, 6);
        let y_b = Array2::zeros((3, 2));
        let base = denoiser_input(&w, &y_b).unwrap();
        for i in 0..3 {
            for c in 0..2 {
                let mut bumped = y_b.clone();
                bumped[[i, c]] = 1.0;
                let x = denoiser_input(&w, &bumped).unwrap();
                let changed: Vec<_> = x
                    .indexed_iter()
                    .filter(|(idx, v)| **v != base[*idx])
                    .map(|(idx, _)| idx)
                    .collect();
                assert_eq!(changed, vec![(5 + i, 2 + c)]);
            }
        }
    }

    #[test]
    fn zero_loss_grad_gives_zero_grads() {
        for variant in Variant::ALL {
            let p = params(variant, BackboneKind::Mlp { hidden: 3, layers: 1 }, DIMS, 2);
            let w = toy_window(8, 4, 1, 1, 7);
            let out = pipeline_forward(&p, &w, Mode::Train, &mut RngStream::new(1, 2)).unwrap();
            let g = pipeline_backward(&p, &out, &Array2::zeros((4, 1))).unwrap();
            assert!(g.to_flat().iter().all(|v| *v == 0.0), "{variant}");
        }
    }

    /// Full-chain check of f(θ) = ½‖y_d(θ) - y‖² with the blur noise fixed.
    fn chain_error(variant: Variant, kind: BackboneKind) -> f64 {
        let p = params(variant, kind, DIMS, 3);
        let w = toy_window(8, 4, 1, 1, 8);
        let flat = p.to_flat();
        let with = |theta: &[f64]| {
            let mut q = p.clone();
            q.set_flat(theta).unwrap();
            q
        };
        let f = |theta: &[f64]| {
            let q = with(theta);
            let out = pipeline_forward(&q, &w, Mode::Train, &mut RngStream::new(4, 2)).unwrap();
            0.5 * (&out.y_d - &w.future).iter().map(|v| v * v).sum::<f64>()
        };
        let g = |theta: &[f64]| {
            let q = with(theta);
            let out = pipeline_forward(&q, &w, Mode::Train, &mut RngStream::new(4, 2)).unwrap();
            let lg = &out.y_d - &w.future;
            let mut grad = pipeline_backward(&q, &out, &lg).unwrap();
            if variant == Variant::Rb {
                // Full derivative includes the residual head's dependence on y_f.
                grad.forecaster = rb_full_forecaster_grad(&q, &w, &lg);
            }
            grad.to_flat()
        };
        finite_diff_check(f, g, &flat, 1e-5).unwrap()
    }

    fn rb_full_forecaster_grad(q: &PipelineParams, w: &Window, lg: &Array2<f64>) -> Vec<f64> {
        let (y_f, fc) = backbone::forward(&q.forecaster, &w.history.view()).unwrap();
        let den = q.denoiser.as_ref().unwrap();
        let input = denoiser_input(w, &y_f).unwrap();
        let (_, dc) = backbone::forward(den, &input.view()).unwrap();
        let (_, gin) = backbone::backward(den, &dc, &lg.view()).unwrap();
        let gy = lg + &gin.slice(s![q.dims.kappa.., q.dims.d_x..]);
        backbone::backward(&q.forecaster, &fc, &gy.view()).unwrap().0
    }

    #[test]
    fn end_to_end_gradients() {
        for variant in Variant::ALL {
            for kind in [BackboneKind::LinearDirect, BackboneKind::Mlp { hidden: 4, layers: 2 }] {
                let e = chain_error(variant, kind);
                assert!(e <= 1e-3, "{variant} {kind}: {e}");
            }
        }
    }

    #[test]
    fn dg_converges_to_dwb_without_noise() {
        let mut dg = params(Variant::Dg, BackboneKind::LinearDirect, DIMS, 5);
        if let BlurParams::Gp(psi) = &mut dg.blur {
            psi.log_amplitude = -30.0;
            psi.log_noise = -30.0;
        }
        let dwb = PipelineParams {
            variant: Variant::Dwb,
            blur: BlurParams::None,
            ..dg.clone()
        };
        let w = toy_window(8, 4, 1, 1, 9);
        let a = pipeline_forward(&dg, &w, Mode::Train, &mut RngStream::new(1, 2)).unwrap();
        let b = pipeline_forward(&dwb, &w, Mode::Train, &mut RngStream::new(1, 2)).unwrap();
        let diff = (&a.y_d - &b.y_d).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("DWC".parse::<Variant>().unwrap(), Variant::Dwb);
        assert!("xx".parse::<Variant>().is_err());
    }

    #[test]
    fn flat_round_trip() {
        for variant in Variant::ALL {
            let mut p = params(variant, BackboneKind::LinearDirect, DIMS, 8);
            let flat = p.to_flat();
            assert_eq!(flat.len(), p.len());
            let before = p.clone();
            p.set_flat(&flat).unwrap();
            assert_eq!(p.to_flat(), before.to_flat());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn contracts_hold(seed in 0u64..10_000, variant_idx in 0usize..6) {
            let variant = Variant::ALL[variant_idx];
            let p = params(variant, BackboneKind::LinearDirect, DIMS, seed);
            let w = toy_window(8, 4, 1, 1, seed + 1);
            for mode in [Mode::Train, Mode::Infer] {
                let out = pipeline_forward(&p, &w, mode, &mut RngStream::new(seed, 2)).unwrap();
                match variant {
                    Variant::BackboneOnly => {
                        prop_assert!(out.y_b.is_none());
                        prop_assert_eq!(&out.y_d, &out.y_f);
                    }
                    Variant::Dwb => prop_assert_eq!(out.y_b.as_ref().unwrap(), &out.y_f),
                    Variant::Dt if mode == Mode::Infer => {
                        prop_assert_eq!(out.y_b.as_ref().unwrap(), &out.y_f)
                    }
                    _ => {}
                }
            }
        }
    }
}
