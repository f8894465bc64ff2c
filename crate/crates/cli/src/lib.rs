//! Library side of the `fbd` command-line tool: experiment config parsing
//! and one function per subcommand, so the commands can be driven from
//! tests without spawning processes.

mod commands;
mod config;
mod error;

pub use commands::{
    cmd_ablate, cmd_gradcheck, cmd_report, cmd_synth, cmd_train, load_series, prepare_split, render_history, run_stem,
    AblateSummary, ReportSummary, TrainArtifacts, AGGREGATE_FILE, CHECKPOINT_DIR, CONFIG_COPY, RECORDS_FILE,
    REPORT_AGGREGATE_FILE, REPORT_FILE, RESULTS_FILE,
};
pub use config::{DatasetConfig, ExperimentConfig, TrainingConfig, WindowConfig};
pub use error::CliError;
