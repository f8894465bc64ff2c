//! Metrics, multi-seed aggregation and report emission.
//!
//! All metrics are computed in z-scored space. A window's error is pooled
//! over its `tau * d_y` entries, then averaged over windows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Window;
use crate::numerics::{NoiseSource, RngStream};
use crate::pipeline::{pipeline_forward, Mode, PipelineError, Variant};
use crate::trainer::{streams, Checkpoint};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no windows to evaluate")]
    NoWindows,
    #[error("records in one aggregate group disagree on {0}")]
    MixedGroup(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn check_shapes(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<(), EvalError> {
    if y.dim() != y_hat.dim() {
        return Err(EvalError::ShapeMismatch {
            expected: y.dim(),
            got: y_hat.dim(),
        });
    }
    Ok(())
}

/// Mean squared entrywise error.
pub fn mse(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<f64, EvalError> {
    check_shapes(y, y_hat)?;
    let n = y.len().max(1) as f64;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// Mean absolute entrywise error.
pub fn mae(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<f64, EvalError> {
    check_shapes(y, y_hat)?;
    let n = y.len().max(1) as f64;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub variant: Variant,
    pub horizon: usize,
    pub seed: u64,
    pub split: Split,
    pub mse: f64,
    pub mae: f64,
}

/// One forecast with every stage the variant exposes.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub y_f: Array2<f64>,
    pub y_b: Option<Array2<f64>>,
    pub y_d: Array2<f64>,
}

/// Anything that forecasts a window in inference mode. Implemented by
/// [`Checkpoint`]; tests plug in oracles.
pub trait Predict {
    fn variant(&self) -> Variant;
    fn horizon(&self) -> usize;
    fn seed(&self) -> u64;
    fn predict<N: NoiseSource>(&self, window: &Window, noise: &mut N) -> Result<Prediction, EvalError>;

    /// The fixed stream inference draws come from.
    fn eval_stream(&self) -> RngStream {
        RngStream::new(self.seed(), streams::EVAL)
    }
}

impl Predict for Checkpoint {
    fn variant(&self) -> Variant {
        self.params.variant
    }

    fn horizon(&self) -> usize {
        self.params.dims.tau
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn predict<N: NoiseSource>(&self, window: &Window, noise: &mut N) -> Result<Prediction, EvalError> {
        let out = pipeline_forward(&self.params, window, Mode::Infer, noise)?;
        Ok(Prediction {
            y_f: out.y_f,
            y_b: out.y_b,
            y_d: out.y_d,
        })
    }
}

/// Per-window `(mse, mae)` of the final forecast, in window order, drawing
/// inference noise from the model's evaluation stream.
pub fn window_errors(model: &impl Predict, windows: &[Window]) -> Result<Vec<(f64, f64)>, EvalError> {
    let mut rng = model.eval_stream();
    windows
        .iter()
        .map(|w| {
            let p = model.predict(w, &mut rng)?;
            Ok((mse(&w.future, &p.y_d)?, mae(&w.future, &p.y_d)?))
        })
        .collect()
}

pub fn evaluate(
    model: &impl Predict,
    windows: &[Window],
    dataset: &str,
    split: Split,
) -> Result<MetricRecord, EvalError> {
    if windows.is_empty() {
        return Err(EvalError::NoWindows);
    }
    let errs = window_errors(model, windows)?;
    let n = errs.len() as f64;
    Ok(MetricRecord {
        dataset: dataset.to_string(),
        variant: model.variant(),
        horizon: model.horizon(),
        seed: model.seed(),
        split,
        mse: errs.iter().map(|e| e.0).sum::<f64>() / n,
        mae: errs.iter().map(|e| e.1).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub variant: Variant,
    pub horizon: usize,
    pub split: Split,
    pub mean_mse: f64,
    pub stderr_mse: f64,
    pub mean_mae: f64,
    pub stderr_mae: f64,
    pub n_seeds: usize,
}

/// Mean and standard error (sample std over √n); stderr is 0 for n = 1.
/// Values are summed in sorted order so the result ignores input order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates records that all share dataset, variant, horizon and split.
pub fn aggregate_group(records: &[MetricRecord]) -> Result<AggregateRow, EvalError> {
    let first = records.first().ok_or(EvalError::NoWindows)?;
    for r in records {
        if r.dataset != first.dataset {
            return Err(EvalError::MixedGroup("dataset"));
        }
        if r.variant != first.variant {
            return Err(EvalError::MixedGroup("variant"));
        }
        if r.horizon != first.horizon {
            return Err(EvalError::MixedGroup("horizon"));
        }
        if r.split != first.split {
            return Err(EvalError::MixedGroup("split"));
        }
    }
    let mses: Vec<f64> = records.iter().map(|r| r.mse).collect();
    let maes: Vec<f64> = records.iter().map(|r| r.mae).collect();
    let (mean_mse, stderr_mse) = mean_stderr(&mses);
    let (mean_mae, stderr_mae) = mean_stderr(&maes);
    Ok(AggregateRow {
        dataset: first.dataset.clone(),
        variant: first.variant,
        horizon: first.horizon,
        split: first.split,
        mean_mse,
        stderr_mse,
        mean_mae,
        stderr_mae,
        n_seeds: records.len(),
    })
}

/// Groups by (dataset, variant, horizon, split); rows come out sorted by
/// that key.
pub fn aggregate(records: &[MetricRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, Split, usize, Variant), Vec<MetricRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.split, r.horizon, r.variant))
            .or_default()
            .push(r.clone());
    }
    groups
        .values()
        .map(|g| aggregate_group(g).expect("grouped by key"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// A sweep cell whose training or evaluation failed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailedCell {
    pub dataset: String,
    pub variant: Variant,
    pub horizon: usize,
}

pub const TABLE_COLUMNS: [&str; 9] = [
    "dataset",
    "variant",
    "horizon",
    "split",
    "mean_mse",
    "stderr_mse",
    "mean_mae",
    "stderr_mae",
    "n_seeds",
];

pub fn render_csv(rows: &[AggregateRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// `"0.165 ±0.001"`.
pub fn format_cell(mean: f64, stderr: f64) -> String {
    format!("{mean:.3} ±{stderr:.3}")
}

/// One MSE table per (dataset, split): variants as columns, horizons as
/// rows. Failed cells print `FAILED`; missing ones stay blank.
pub fn render_markdown(rows: &[AggregateRow], failed: &[FailedCell]) -> String {
    let mut tables: BTreeMap<(String, Option<Split>), BTreeMap<(usize, Variant), String>> = BTreeMap::new();
    for r in rows {
        tables
            .entry((r.dataset.clone(), Some(r.split)))
            .or_default()
            .insert((r.horizon, r.variant), format_cell(r.mean_mse, r.stderr_mse));
    }
    for f in failed {
        let splits: Vec<_> = tables.keys().filter(|(d, _)| *d == f.dataset).cloned().collect();
        let keys = if splits.is_empty() {
            vec![(f.dataset.clone(), Some(Split::Test))]
        } else {
            splits
        };
        for key in keys {
            tables
                .entry(key)
                .or_default()
                .insert((f.horizon, f.variant), "FAILED".to_string());
        }
    }
    let mut out = String::new();
    for (i, ((dataset, split), cells)) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let split = split.map_or(String::new(), |s| format!(" ({s})"));
        writeln!(out, "## {dataset}{split}\n").unwrap();
        let variants: Vec<Variant> = Variant::ALL
            .into_iter()
            .filter(|v| cells.keys().any(|(_, cv)| cv == v))
            .collect();
        let mut horizons: Vec<usize> = cells.keys().map(|(h, _)| *h).collect();
        horizons.dedup();
        out.push_str("| horizon |");
        for v in &variants {
            write!(out, " {v} |").unwrap();
        }
        out.push_str("\n|---:|");
        for _ in &variants {
            out.push_str("---:|");
        }
        out.push('\n');
        for h in horizons {
            write!(out, "| {h} |").unwrap();
            for v in &variants {
                write!(out, " {} |", cells.get(&(h, *v)).map_or("", String::as_str)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    std::fs::write(path, contents).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_table(
    rows: &[AggregateRow],
    failed: &[FailedCell],
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<(), EvalError> {
    let text = match format {
        TableFormat::Csv => render_csv(rows),
        TableFormat::Markdown => render_markdown(rows, failed),
    };
    write_file(path.as_ref(), &text)
}

pub fn write_records(records: &[MetricRecord], path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(EvalError::from)).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Forecast-point CSV for one window: `step,y_true,y_f,y_b,y_d`, one row per
/// horizon step, empty `y_b` cells when the variant has no blur output.
/// Multi-target series get one column group per channel (`y_true_0`, ...).
pub fn render_forecast_points(prediction: &Prediction, window: &Window) -> String {
    let (tau, d_y) = window.future.dim();
    let stages = ["y_true", "y_f", "y_b", "y_d"];
    let mut header = vec!["step".to_string()];
    for c in 0..d_y {
        for s in stages {
            header.push(if d_y == 1 { s.to_string() } else { format!("{s}_{c}") });
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..tau {
        let mut row = vec![(t + 1).to_string()];
        for c in 0..d_y {
            row.push(window.future[[t, c]].to_string());
            row.push(prediction.y_f[[t, c]].to_string());
            row.push(fmt_opt(prediction.y_b.as_ref().map(|b| b[[t, c]])));
            row.push(prediction.y_d[[t, c]].to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes [`render_forecast_points`] for `window` using the model's
/// evaluation stream.
pub fn emit_forecast_points(model: &impl Predict, window: &Window, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let prediction = model.predict(window, &mut model.eval_stream())?;
    write_file(path.as_ref(), &render_forecast_points(&prediction, window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn metric_hand_cases() {
        assert_eq!(mse(&col(&[1.0, 2.0, 3.0]), &col(&[2.0, 2.0, 5.0])).unwrap(), 5.0 / 3.0);
        assert_eq!(mae(&col(&[1.0, 2.0, 3.0]), &col(&[2.0, 2.0, 5.0])).unwrap(), 1.0);
        assert_eq!(mse(&col(&[0.0, 0.0]), &col(&[1.0, 1.0])).unwrap(), 1.0);
        let y = arr2(&[[1.5, -2.0], [0.25, 4.0]]);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert!(matches!(
            mse(&col(&[1.0]), &col(&[1.0, 2.0])),
            Err(EvalError::ShapeMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn metric_properties(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40)) {
            let y = col(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let yh = col(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let m = mse(&y, &yh).unwrap();
            let a = mae(&y, &yh).unwrap();
            prop_assert!(m >= 0.0 && a >= 0.0);
            prop_assert!(a <= m.sqrt() * (1.0 + 1e-12) + 1e-15);
            let mut rev = pairs.clone();
            rev.reverse();
            let yr = col(&rev.iter().map(|p| p.0).collect::<Vec<_>>());
            let yhr = col(&rev.iter().map(|p| p.1).collect::<Vec<_>>());
            prop_assert!((mse(&yr, &yhr).unwrap() - m).abs() <= 1e-12 * m.max(1.0));
        }

        #[test]
        fn aggregate_ignores_order(mut v in prop::collection::vec(0.0f64..5.0, 1..12), rot in 0usize..12) {
            let recs = |vals: &[f64]| -> Vec<MetricRecord> {
                vals.iter().enumerate().map(|(i, &m)| record("d", Variant::Dg, 24, i as u64, m)).collect()
            };
            let a = aggregate(&recs(&v));
            let k = rot % v.len();
            v.rotate_left(k);
            prop_assert_eq!(a, aggregate(&recs(&v)));
        }
    }

    fn record(dataset: &str, variant: Variant, horizon: usize, seed: u64, mse: f64) -> MetricRecord {
        MetricRecord {
            dataset: dataset.into(),
            variant,
            horizon,
            seed,
            split: Split::Test,
            mse,
            mae: mse.sqrt(),
        }
    }

    #[test]
    fn aggregate_hand_case() {
        let recs: Vec<_> = [0.1, 0.2, 0.3]
            .iter()
            .enumerate()
            .map(|(i, &m)| record("synth", Variant::Dg, 24, i as u64, m))
            .collect();
        let rows = aggregate(&recs);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean_mse - 0.2).abs() < 1e-15);
        assert!((rows[0].stderr_mse - 0.1 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[0].n_seeds, 3);

        let single = aggregate(&recs[..1]);
        assert_eq!(single[0].stderr_mse, 0.0);
        assert_eq!(single[0].stderr_mae, 0.0);
    }

    #[test]
    fn mixed_group_rejected() {
        let recs = vec![
            record("a", Variant::Dg, 24, 0, 0.1),
            record("a", Variant::Di, 24, 1, 0.1),
        ];
        assert!(matches!(aggregate_group(&recs), Err(EvalError::MixedGroup("variant"))));
        assert_eq!(aggregate(&recs).len(), 2);
    }

    #[test]
    fn csv_layout() {
        assert_eq!(
            render_csv(&[]),
            "dataset,variant,horizon,split,mean_mse,stderr_mse,mean_mae,stderr_mae,n_seeds\n"
        );
        let rows = aggregate(&[record("synth", Variant::BackboneOnly, 24, 0, 0.25)]);
        let text = render_csv(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "synth,backbone,24,test,0.25,0.0,0.5,0.0,1");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn markdown_cells() {
        assert_eq!(format_cell(0.165, 0.001), "0.165 ±0.001");
        let mut rows = aggregate(&[
            record("elec", Variant::Dg, 24, 0, 0.165),
            record("elec", Variant::BackboneOnly, 24, 0, 0.2),
            record("elec", Variant::Dg, 48, 0, 0.3),
        ]);
        rows.iter_mut()
            .find(|r| r.variant == Variant::Dg && r.horizon == 24)
            .unwrap()
            .stderr_mse = 0.001;
        let failed = [FailedCell {
            dataset: "elec".into(),
            variant: Variant::Di,
            horizon: 48,
        }];
        let md = render_markdown(&rows, &failed);
        let expected = "## elec (test)\n\n\
            | horizon | backbone | dg | di |\n\
            |---:|---:|---:|---:|\n\
            | 24 | 0.200 ±0.000 | 0.165 ±0.001 |  |\n\
            | 48 |  | 0.300 ±0.000 | FAILED |\n";
        assert_eq!(md, expected);
    }

    struct Oracle;

    impl Predict for Oracle {
        fn variant(&self) -> Variant {
            Variant::Dg
        }
        fn horizon(&self) -> usize {
            2
        }
        fn seed(&self) -> u64 {
            0
        }
        fn predict<N: NoiseSource>(&self, w: &Window, _: &mut N) -> Result<Prediction, EvalError> {
            Ok(Prediction {
                y_f: w.future.clone() * 0.5,
                y_b: None,
                y_d: w.future.clone(),
            })
        }
    }

    fn toy_window() -> Window {
        Window {
            cutoff: 3,
            history: Array2::zeros((3, 2)),
            future_features: Array2::zeros((2, 1)),
            future: arr2(&[[1.0], [2.0]]),
        }
    }

    #[test]
    fn oracle_scores_zero() {
        let rec = evaluate(&Oracle, &[toy_window(), toy_window()], "toy", Split::Test).unwrap();
        assert_eq!((rec.mse, rec.mae), (0.0, 0.0));
        assert!(matches!(
            evaluate(&Oracle, &[], "toy", Split::Test),
            Err(EvalError::NoWindows)
        ));
    }

    #[test]
    fn forecast_points_layout() {
        let w = toy_window();
        let text = render_forecast_points(&Oracle.predict(&w, &mut crate::numerics::ZeroNoise).unwrap(), &w);
        assert_eq!(text, "step,y_true,y_f,y_b,y_d\n1,1,0.5,,1\n2,2,1,,2\n");
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let recs = vec![
            record("a", Variant::Rb, 24, 3, 0.1 + 0.2),
            record("a", Variant::BackboneOnly, 96, u64::MAX, 1.0 / 3.0),
        ];
        write_records(&recs, &path).unwrap();
        assert_eq!(read_records(&path).unwrap(), recs);
    }
}
