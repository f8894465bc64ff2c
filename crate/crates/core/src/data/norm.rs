use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{DataError, RawSeries};

/// Standard deviations below this are replaced by 1.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel z-score statistics for features and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

fn channel_stats(block: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    block
        .axis_iter(Axis(1))
        .map(|col| {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (mean, if std < STD_FLOOR { 1.0 } else { std })
        })
        .unzip()
}

/// Population mean/std per channel over the first `floor(train_fraction * L)`
/// steps (at least one step).
pub fn zscore_fit(series: &RawSeries, train_fraction: f64) -> Result<NormStats, DataError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DataError::InvalidConfig(format!(
            "train_fraction must lie in (0, 1], got {train_fraction}"
        )));
    }
    if series.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let n = ((train_fraction * series.len() as f64).floor() as usize).max(1);
    let (feature_mean, feature_std) = channel_stats(series.features.slice(ndarray::s![..n, ..]));
    let (target_mean, target_std) = channel_stats(series.targets.slice(ndarray::s![..n, ..]));
    Ok(NormStats {
        feature_mean,
        feature_std,
        target_mean,
        target_std,
    })
}

fn check(series: &RawSeries, stats: &NormStats) -> Result<(), DataError> {
    let expected = stats.feature_mean.len() + stats.target_mean.len();
    let got = series.n_features() + series.n_targets();
    if stats.feature_mean.len() != series.n_features() || stats.target_mean.len() != series.n_targets() {
        return Err(DataError::ChannelMismatch { expected, got });
    }
    Ok(())
}

fn map_columns(block: &mut Array2<f64>, mean: &[f64], std: &[f64], f: impl Fn(f64, f64, f64) -> f64) {
    for (mut col, (&m, &s)) in block.axis_iter_mut(Axis(1)).zip(mean.iter().zip(std)) {
        col.mapv_inplace(|v| f(v, m, s));
    }
}

pub fn zscore_apply(series: &RawSeries, stats: &NormStats) -> Result<RawSeries, DataError> {
    check(series, stats)?;
    let mut out = series.clone();
    map_columns(&mut out.features, &stats.feature_mean, &stats.feature_std, |v, m, s| {
        (v - m) / s
    });
    map_columns(&mut out.targets, &stats.target_mean, &stats.target_std, |v, m, s| {
        (v - m) / s
    });
    Ok(out)
}

pub fn zscore_invert(series: &RawSeries, stats: &NormStats) -> Result<RawSeries, DataError> {
    check(series, stats)?;
    let mut out = series.clone();
    map_columns(&mut out.features, &stats.feature_mean, &stats.feature_std, |v, m, s| {
        v * s + m
    });
    map_columns(&mut out.targets, &stats.target_mean, &stats.target_std, |v, m, s| {
        v * s + m
    });
    Ok(out)
}
