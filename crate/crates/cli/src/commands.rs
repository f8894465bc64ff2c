use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fbd::data::{
    load_csv, make_windows, split_windows, synth_multiscale, write_csv, zscore_apply, zscore_fit, RawSeries,
};
use fbd::eval::{
    aggregate, emit_forecast_points, emit_table, evaluate, read_records, render_markdown, window_errors, write_records,
    AggregateRow, FailedCell, MetricRecord, Split, TableFormat,
};
use fbd::gradcheck::{run_default_suite, SuiteReport};
use fbd::trainer::{grid_search, train, Checkpoint, EpochMetrics};
use fbd::{Variant, WindowSplit};
use rayon::prelude::*;

use crate::{CliError, ExperimentConfig};

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const RESULTS_FILE: &str = "results.md";
pub const CONFIG_COPY: &str = "config.toml";
pub const CHECKPOINT_DIR: &str = "checkpoints";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn load_series(cfg: &ExperimentConfig) -> Result<RawSeries, CliError> {
    Ok(match &cfg.dataset.csv {
        Some(path) => load_csv(path, &cfg.dataset.csv_columns())?,
        None => synth_multiscale(&cfg.dataset.synth)?,
    })
}

/// Z-scores with train-fraction statistics, windows and splits.
pub fn prepare_split(cfg: &ExperimentConfig, series: &RawSeries, tau: usize) -> Result<WindowSplit, CliError> {
    let w = &cfg.window;
    let stats = zscore_fit(series, w.fractions[0])?;
    let normalized = zscore_apply(series, &stats)?;
    let windows = make_windows(&normalized, w.kappa, tau, w.stride)?;
    Ok(split_windows(windows, w.fractions)?)
}

/// `{dataset}_{variant}_h{tau}_s{seed}`.
pub fn run_stem(cfg: &ExperimentConfig, variant: Variant, tau: usize, seed: u64) -> String {
    format!("{}_{}_h{}_s{}", cfg.dataset.name, variant, tau, seed)
}

pub fn render_history(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,train_mse,val_mse\n");
    for m in history {
        out.push_str(&format!("{},{},{},{}\n", m.epoch, m.train_loss, m.train_mse, m.val_mse));
    }
    out
}

/// Writes the synthetic series to `{out}/{dataset.name}.csv`.
pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let longest = cfg.window.horizons.iter().copied().max().unwrap_or(1);
    cfg.dataset.synth.validate_for(cfg.window.kappa, longest)?;
    let series = synth_multiscale(&cfg.dataset.synth)?;
    create_dir(out)?;
    let path = out.join(format!("{}.csv", cfg.dataset.name));
    write_csv(&series, &path)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub best_epoch: usize,
}

fn fit(cfg: &ExperimentConfig, split: &WindowSplit, variant: Variant, seed: u64) -> Result<Checkpoint, CliError> {
    let tc = cfg.train_config(variant, seed);
    Ok(if cfg.training.search {
        grid_search(split, &tc)?
    } else {
        train(split, &tc)?
    })
}

fn save_run(ckpt: &Checkpoint, dir: &Path, stem: &str) -> Result<TrainArtifacts, CliError> {
    create_dir(dir)?;
    let checkpoint = dir.join(format!("{stem}.ckpt"));
    let metrics = dir.join(format!("{stem}_metrics.csv"));
    ckpt.save(&checkpoint)?;
    write_text(&metrics, &render_history(&ckpt.history))?;
    Ok(TrainArtifacts {
        checkpoint,
        metrics,
        best_epoch: ckpt.epoch,
    })
}

/// Trains one (variant, horizon, seed) run and writes its checkpoint and
/// per-epoch metrics under `out`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    variant: Variant,
    tau: usize,
    seed: u64,
    out: &Path,
) -> Result<TrainArtifacts, CliError> {
    if tau == 0 {
        return Err(CliError::Config("horizon must be >= 1".into()));
    }
    if cfg.dataset.csv.is_none() {
        cfg.dataset.synth.validate_for(cfg.window.kappa, tau)?;
    }
    let series = load_series(cfg)?;
    let split = prepare_split(cfg, &series, tau)?;
    let ckpt = fit(cfg, &split, variant, seed)?;
    save_run(&ckpt, out, &run_stem(cfg, variant, tau, seed))
}

#[derive(Debug, Clone)]
pub struct AblateSummary {
    pub runs: usize,
    pub records: Vec<MetricRecord>,
    /// Test-split aggregates.
    pub rows: Vec<AggregateRow>,
    /// Distinct (variant, horizon) cells with at least one failed run.
    pub failed: Vec<FailedCell>,
    pub failed_runs: usize,
}

fn run_cell(
    cfg: &ExperimentConfig,
    split: &WindowSplit,
    variant: Variant,
    tau: usize,
    seed: u64,
    ckpt_dir: &Path,
) -> Result<Vec<MetricRecord>, CliError> {
    let ckpt = fit(cfg, split, variant, seed)?;
    save_run(&ckpt, ckpt_dir, &run_stem(cfg, variant, tau, seed))?;
    let mut records = vec![evaluate(&ckpt, &split.test, &cfg.dataset.name, Split::Test)?];
    if !split.validation.is_empty() {
        records.push(evaluate(
            &ckpt,
            &split.validation,
            &cfg.dataset.name,
            Split::Validation,
        )?);
    }
    Ok(records)
}

/// Trains every variant x horizon x seed cell on up to `workers` threads,
/// evaluates on the test split, and writes the config copy, checkpoints,
/// records, aggregates and the markdown table under `out`.
///
/// A failing cell does not stop the sweep; it shows up as `FAILED` in the
/// table and in [`AblateSummary::failed`].
pub fn cmd_ablate(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<AblateSummary, CliError> {
    if workers == 0 {
        return Err(CliError::Config("--workers must be >= 1".into()));
    }
    let series = load_series(cfg)?;
    let splits = cfg
        .window
        .horizons
        .iter()
        .map(|&tau| Ok((tau, prepare_split(cfg, &series, tau)?)))
        .collect::<Result<BTreeMap<_, _>, CliError>>()?;
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    create_dir(&ckpt_dir)?;
    write_text(&out.join(CONFIG_COPY), &cfg.to_toml())?;

    let mut cells = Vec::new();
    for &tau in &cfg.window.horizons {
        for &variant in &cfg.variants {
            for &seed in &cfg.seeds {
                cells.push((tau, variant, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(tau, variant, seed)| run_cell(cfg, &splits[&tau], variant, tau, seed, &ckpt_dir))
            .collect()
    });

    let mut records = Vec::new();
    let mut failed = Vec::new();
    let mut failed_runs = 0;
    for (&(tau, variant, seed), result) in cells.iter().zip(results) {
        match result {
            Ok(mut r) => records.append(&mut r),
            Err(e) => {
                eprintln!("cell {} failed: {e}", run_stem(cfg, variant, tau, seed));
                failed_runs += 1;
                failed.push(FailedCell {
                    dataset: cfg.dataset.name.clone(),
                    variant,
                    horizon: tau,
                });
            }
        }
    }
    failed.dedup();
    write_records(&records, out.join(RECORDS_FILE))?;
    let all_rows = aggregate(&records);
    emit_table(&all_rows, &failed, TableFormat::Csv, out.join(AGGREGATE_FILE))?;
    let rows: Vec<AggregateRow> = all_rows.into_iter().filter(|r| r.split == Split::Test).collect();
    emit_table(&rows, &failed, TableFormat::Markdown, out.join(RESULTS_FILE))?;
    Ok(AblateSummary {
        runs: cells.len(),
        records,
        rows,
        failed,
        failed_runs,
    })
}

pub fn cmd_gradcheck(seed: u64) -> SuiteReport {
    run_default_suite(seed)
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub record_files: Vec<PathBuf>,
    pub rows: Vec<AggregateRow>,
    pub markdown: PathBuf,
    pub forecast_files: Vec<PathBuf>,
}

pub const REPORT_FILE: &str = "report.md";
pub const REPORT_AGGREGATE_FILE: &str = "report_aggregate.csv";

fn find_record_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            find_record_files(&path, out)?;
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(RECORDS_FILE))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Forecast points for the best and worst DG test windows of each horizon,
/// using the lowest-seed DG checkpoint.
fn dg_forecast_points(dir: &Path, cfg: &ExperimentConfig, records: &[MetricRecord]) -> Result<Vec<PathBuf>, CliError> {
    let mut seeds: BTreeMap<usize, u64> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.variant == Variant::Dg && r.split == Split::Test)
    {
        let s = seeds.entry(r.horizon).or_insert(r.seed);
        *s = (*s).min(r.seed);
    }
    let mut files = Vec::new();
    let series = if seeds.is_empty() {
        None
    } else {
        Some(load_series(cfg)?)
    };
    for (tau, seed) in seeds {
        let path = dir
            .join(CHECKPOINT_DIR)
            .join(format!("{}.ckpt", run_stem(cfg, Variant::Dg, tau, seed)));
        if !path.is_file() {
            continue;
        }
        let ckpt = Checkpoint::load(&path)?;
        let split = prepare_split(cfg, series.as_ref().expect("loaded above"), tau)?;
        let errors = window_errors(&ckpt, &split.test)?;
        let by_mse = |a: &&(usize, (f64, f64)), b: &&(usize, (f64, f64))| a.1 .0.total_cmp(&b.1 .0);
        let indexed: Vec<_> = errors.into_iter().enumerate().collect();
        let (Some(best), Some(worst)) = (indexed.iter().min_by(by_mse), indexed.iter().max_by(by_mse)) else {
            continue;
        };
        for (label, idx) in [("best", best.0), ("worst", worst.0)] {
            let file = dir.join(format!("forecast_dg_h{tau}_{label}.csv"));
            emit_forecast_points(&ckpt, &split.test[idx], &file)?;
            files.push(file);
        }
    }
    Ok(files)
}

/// Aggregates every `*records.csv` under `dir` into `report.md` and
/// `report_aggregate.csv`. When the sweep's config copy and DG checkpoints
/// are present, also writes best/worst DG forecast-point files.
pub fn cmd_report(dir: &Path) -> Result<ReportSummary, CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingInput(dir.to_path_buf()));
    }
    let mut record_files = Vec::new();
    find_record_files(dir, &mut record_files)?;
    let mut records = Vec::new();
    for f in &record_files {
        records.extend(read_records(f)?);
    }
    if records.is_empty() {
        return Err(CliError::EmptyResults(dir.to_path_buf()));
    }
    let rows = aggregate(&records);
    emit_table(&rows, &[], TableFormat::Csv, dir.join(REPORT_AGGREGATE_FILE))?;

    let config_path = dir.join(CONFIG_COPY);
    let forecast_files = if config_path.is_file() {
        let cfg = ExperimentConfig::load(&config_path)?;
        dg_forecast_points(dir, &cfg, &records)?
    } else {
        vec![]
    };

    let mut md = format!(
        "# Results\n\n{} records from {} file(s).\n\n",
        records.len(),
        record_files.len()
    );
    md.push_str(&render_markdown(&rows, &[]));
    if !forecast_files.is_empty() {
        md.push_str("\n## Forecast points\n\n");
        for f in &forecast_files {
            let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            md.push_str(&format!("- {name}\n"));
        }
    }
    let markdown = dir.join(REPORT_FILE);
    write_text(&markdown, &md)?;
    Ok(ReportSummary {
        record_files,
        rows,
        markdown,
        forecast_files,
    })
}
