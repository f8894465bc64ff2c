use ndarray::{concatenate, s, Array2, Axis};

use super::{DataError, RawSeries};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.8, 0.1, 0.1];

/// One sample: `kappa` history steps ending just before `cutoff`, and the
/// `tau` steps starting at `cutoff`.
///
/// `history` is `kappa x (d_x + d_y)` with feature columns first.
/// `future_features` carries the covariates of the forecast steps, which the
/// denoiser sees alongside the blurred forecast; only covariates known ahead
/// of time (calendar encodings and the like) should be configured as
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub cutoff: usize,
    pub history: Array2<f64>,
    pub future_features: Array2<f64>,
    pub future: Array2<f64>,
}

impl Window {
    pub fn kappa(&self) -> usize {
        self.history.nrows()
    }

    pub fn tau(&self) -> usize {
        self.future.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.future_features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.future.ncols()
    }

    /// Row indices of the history steps.
    pub fn history_range(&self) -> std::ops::Range<usize> {
        self.cutoff - self.kappa()..self.cutoff
    }

    /// Row indices of the forecast steps.
    pub fn future_range(&self) -> std::ops::Range<usize> {
        self.cutoff..self.cutoff + self.tau()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSplit {
    pub train: Vec<Window>,
    pub validation: Vec<Window>,
    pub test: Vec<Window>,
}

/// All windows with cutoffs `kappa, kappa + stride, ...` that fit in the
/// series: `floor((L - kappa - tau) / stride) + 1` of them.
pub fn make_windows(series: &RawSeries, kappa: usize, tau: usize, stride: usize) -> Result<Vec<Window>, DataError> {
    if kappa == 0 || tau == 0 || stride == 0 {
        return Err(DataError::InvalidConfig(format!(
            "kappa, tau and stride must be positive (got {kappa}, {tau}, {stride})"
        )));
    }
    let len = series.len();
    if len < kappa + tau {
        return Err(DataError::SeriesTooShort { len, kappa, tau });
    }
    let joined = concatenate(Axis(1), &[series.features.view(), series.targets.view()])
        .expect("features and targets share row count");
    let count = (len - kappa - tau) / stride + 1;
    Ok((0..count)
        .map(|i| {
            let cutoff = kappa + i * stride;
            Window {
                cutoff,
                history: joined.slice(s![cutoff - kappa..cutoff, ..]).to_owned(),
                future_features: series.features.slice(s![cutoff..cutoff + tau, ..]).to_owned(),
                future: series.targets.slice(s![cutoff..cutoff + tau, ..]).to_owned(),
            }
        })
        .collect())
}

/// Contiguous-in-time split: train takes the earliest windows, test the
/// latest. Train and validation counts are `round(n * fraction)`, test gets
/// the remainder.
pub fn split_windows(windows: Vec<Window>, fractions: [f64; 3]) -> Result<WindowSplit, DataError> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::BadFractions(fractions));
    }
    let n = windows.len();
    let n_train = ((n as f64 * fractions[0]).round() as usize).min(n);
    let n_val = ((n as f64 * fractions[1]).round() as usize).min(n - n_train);
    let mut rest = windows;
    let tail = rest.split_off(n_train);
    let train = rest;
    let mut rest = tail;
    let test = rest.split_off(n_val);
    Ok(WindowSplit {
        train,
        validation: rest,
        test,
    })
}
