//! Differentiable forecasting backbones.
//!
//! Both kinds map a `in_steps x in_channels` input matrix to a
//! `out_steps x out_channels` forecast, flattening row-major (time outer,
//! channel inner) on the way in and reshaping on the way out. Gradients are
//! exact and hand-written; [`backward`] returns gradients of
//! `⟨upstream, output⟩` with respect to both the parameters and the input,
//! the latter being what lets the denoiser's loss reach the blur and the
//! forecaster.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackboneError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("forward cache does not match these parameters")]
    StaleCache,
    #[error("invalid backbone: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackboneKind {
    /// One affine map from the flattened input to the flattened output.
    LinearDirect,
    /// `layers` affine+tanh blocks of width `hidden`, then an affine head.
    Mlp { hidden: usize, layers: usize },
}

impl BackboneKind {
    /// The hidden-width/layer-count grid searched for MLP backbones.
    pub fn search_space() -> Vec<BackboneKind> {
        let mut out = Vec::new();
        for hidden in [16, 32] {
            for layers in [1, 2] {
                out.push(BackboneKind::Mlp { hidden, layers });
            }
        }
        out
    }
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackboneKind::LinearDirect => write!(f, "linear"),
            BackboneKind::Mlp { hidden, layers } => write!(f, "mlp{hidden}x{layers}"),
        }
    }
}

/// Flat parameter vector plus the metadata needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: BackboneKind,
    pub in_steps: usize,
    pub in_channels: usize,
    pub out_steps: usize,
    pub out_channels: usize,
    /// `(name, dims)` for each tensor, in storage order.
    pub shapes: Vec<(String, Vec<usize>)>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

fn layout(kind: BackboneKind, fan_in: usize, fan_out: usize) -> Vec<(String, Vec<usize>)> {
    match kind {
        BackboneKind::LinearDirect => vec![("w".into(), vec![fan_in, fan_out]), ("b".into(), vec![fan_out])],
        BackboneKind::Mlp { hidden, layers } => {
            let mut shapes = Vec::new();
            let mut prev = fan_in;
            for l in 1..=layers {
                shapes.push((format!("w{l}"), vec![prev, hidden]));
                shapes.push((format!("b{l}"), vec![hidden]));
                prev = hidden;
            }
            shapes.push(("w_out".into(), vec![prev, fan_out]));
            shapes.push(("b_out".into(), vec![fan_out]));
            shapes
        }
    }
}

impl ModelParams {
    /// All-zero parameters with the right layout.
    pub fn zeros(
        kind: BackboneKind,
        in_steps: usize,
        in_channels: usize,
        out_steps: usize,
        out_channels: usize,
    ) -> Result<Self, BackboneError> {
        if in_steps == 0 || in_channels == 0 || out_steps == 0 || out_channels == 0 {
            return Err(BackboneError::Invalid("all dimensions must be positive".into()));
        }
        if let BackboneKind::Mlp { hidden, layers } = kind {
            if hidden == 0 || layers == 0 {
                return Err(BackboneError::Invalid("MLP needs hidden >= 1 and layers >= 1".into()));
            }
        }
        let shapes = layout(kind, in_steps * in_channels, out_steps * out_channels);
        let len = shapes.iter().map(|(_, d)| d.iter().product::<usize>()).sum();
        Ok(Self {
            kind,
            in_steps,
            in_channels,
            out_steps,
            out_channels,
            shapes,
            values: vec![0.0; len],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn offset_of(&self, name: &str) -> Option<(usize, &[usize])> {
        let mut off = 0;
        for (n, dims) in &self.shapes {
            if n == name {
                return Some((off, dims));
            }
            off += dims.iter().product::<usize>();
        }
        None
    }

    /// The storage slice of tensor `name`.
    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let (off, dims) = self.offset_of(name)?;
        let len = dims.iter().product::<usize>();
        Some(&self.values[off..off + len])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let (off, dims) = self.offset_of(name)?;
        let len = dims.iter().product::<usize>();
        Some(&mut self.values[off..off + len])
    }

    /// Splits `values` into `(weight, bias)` view pairs for each layer,
    /// output head last.
    fn layers(&self) -> Vec<(ArrayView2<'_, f64>, ArrayView1<'_, f64>)> {
        let mut out = Vec::new();
        let mut off = 0;
        for pair in self.shapes.chunks(2) {
            let (r, c) = (pair[0].1[0], pair[0].1[1]);
            let w = ArrayView2::from_shape((r, c), &self.values[off..off + r * c]).expect("layout");
            off += r * c;
            let b = ArrayView1::from(&self.values[off..off + c]);
            off += c;
            out.push((w, b));
        }
        out
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(
    kind: BackboneKind,
    in_steps: usize,
    in_channels: usize,
    out_steps: usize,
    out_channels: usize,
    rng: &mut RngStream,
) -> Result<ModelParams, BackboneError> {
    let mut p = ModelParams::zeros(kind, in_steps, in_channels, out_steps, out_channels)?;
    let mut off = 0;
    for (name, dims) in p.shapes.clone() {
        let len: usize = dims.iter().product();
        if name.starts_with('w') {
            let bound = (6.0 / (dims[0] + dims[1]) as f64).sqrt();
            for v in &mut p.values[off..off + len] {
                *v = rng.uniform(-bound, bound);
            }
        }
        off += len;
    }
    Ok(p)
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input_dims: (usize, usize),
    /// Flattened input followed by each hidden layer's post-tanh output.
    activations: Vec<Array1<f64>>,
}

pub fn forward(params: &ModelParams, input: &ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache), BackboneError> {
    let expected = (params.in_steps, params.in_channels);
    if input.dim() != expected {
        return Err(BackboneError::DimensionMismatch {
            expected,
            got: input.dim(),
        });
    }
    let x: Array1<f64> = input.iter().copied().collect();
    let layers = params.layers();
    let (head, hidden) = layers.split_last().expect("at least one layer");
    let mut activations = vec![x];
    for (w, b) in hidden {
        let z = activations.last().unwrap().dot(w) + b;
        activations.push(z.mapv(f64::tanh));
    }
    let out = activations.last().unwrap().dot(&head.0) + head.1;
    let out = out
        .into_shape_with_order((params.out_steps, params.out_channels))
        .expect("output size");
    Ok((
        out,
        ForwardCache {
            input_dims: expected,
            activations,
        },
    ))
}

/// Gradients of `⟨upstream, forward(params, input)⟩`.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    upstream: &ArrayView2<f64>,
) -> Result<(Vec<f64>, Array2<f64>), BackboneError> {
    let layers = params.layers();
    if cache.input_dims != (params.in_steps, params.in_channels)
        || cache.activations.len() != layers.len()
        || upstream.dim() != (params.out_steps, params.out_channels)
    {
        return Err(BackboneError::StaleCache);
    }
    let mut grad = vec![0.0; params.len()];
    // Walk layers back to front, writing into the matching slices.
    let mut ends: Vec<usize> = Vec::with_capacity(layers.len());
    let mut off = 0;
    for (w, b) in &layers {
        off += w.len() + b.len();
        ends.push(off);
    }
    let mut g: Array1<f64> = upstream.iter().copied().collect();
    for (idx, (w, b)) in layers.iter().enumerate().rev() {
        let h_prev = &cache.activations[idx];
        if idx + 1 < layers.len() {
            // Through tanh of this layer's output.
            let h = &cache.activations[idx + 1];
            g = &g * &h.mapv(|v| 1.0 - v * v);
        }
        let end = ends[idx];
        let b_start = end - b.len();
        let w_start = b_start - w.len();
        let cols = w.ncols();
        for (i, &hp) in h_prev.iter().enumerate() {
            let row = &mut grad[w_start + i * cols..w_start + (i + 1) * cols];
            for (slot, &gj) in row.iter_mut().zip(g.iter()) {
                *slot = hp * gj;
            }
        }
        grad[b_start..end].copy_from_slice(g.as_slice().expect("contiguous"));
        g = w.dot(&g);
    }
    let input_grad = g
        .into_shape_with_order(cache.input_dims)
        .map_err(|_| BackboneError::StaleCache)?;
    Ok((grad, input_grad))
}
