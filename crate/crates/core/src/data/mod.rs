//! Series ingestion, synthetic data, normalization, windowing and splits.

mod csv_input;
mod norm;
mod synth;
mod window;

pub use csv_input::{load_csv, write_csv, CsvColumns};
pub use norm::{zscore_apply, zscore_fit, zscore_invert, NormStats, STD_FLOOR};
pub use synth::{synth_multiscale, SynthConfig, SYNTH_FEATURES};
pub use window::{make_windows, split_windows, Window, WindowSplit, DEFAULT_FRACTIONS};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("non-numeric cell in row {0}, column {1:?}")]
    NonNumericCell(usize, String),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("time column {col:?} is not a regular unit-stride index at row {row}")]
    IrregularTime { row: usize, col: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("channel mismatch: stats have {expected} channels, series has {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("series too short: length {len} < lookback {kappa} + horizon {tau}")]
    SeriesTooShort { len: usize, kappa: usize, tau: usize },
    #[error("split fractions {0:?} must be non-negative and sum to 1")]
    BadFractions([f64; 3]),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
}

/// A regularly sampled multivariate series.
///
/// `features` is `L x d_x` (may have zero columns), `targets` is `L x d_y`
/// with `d_y >= 1`, and `time_index` runs `t0, t0+1, ...` without gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub time_index: Vec<i64>,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub features: Array2<f64>,
    pub targets: Array2<f64>,
}

impl RawSeries {
    pub fn new(
        time_index: Vec<i64>,
        feature_names: Vec<String>,
        target_names: Vec<String>,
        features: Array2<f64>,
        targets: Array2<f64>,
    ) -> Result<Self, DataError> {
        let len = time_index.len();
        if features.nrows() != len || targets.nrows() != len {
            return Err(DataError::InvalidSeries(format!(
                "row counts differ: time {len}, features {}, targets {}",
                features.nrows(),
                targets.nrows()
            )));
        }
        if targets.ncols() == 0 {
            return Err(DataError::InvalidSeries("at least one target channel required".into()));
        }
        if feature_names.len() != features.ncols() || target_names.len() != targets.ncols() {
            return Err(DataError::InvalidSeries("column names do not match data width".into()));
        }
        if time_index.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(DataError::InvalidSeries("time index must have unit stride".into()));
        }
        Ok(Self {
            time_index,
            feature_names,
            target_names,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.time_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_index.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }
}
