//! The TOML experiment file.
//!
//! ```toml
//! out_dir = "results"
//! seeds = [0, 1, 2, 3, 4]
//! variants = ["backbone", "dg", "di", "dwb", "rb", "dt"]
//! backbone = { type = "linear_direct" }     # or { type = "mlp", hidden = 16, layers = 1 }
//!
//! [dataset]
//! name = "synth"
//! # csv = "data/electricity.csv"            # relative to this file
//! # time_column = "date"
//! # target_columns = ["OT"]
//! # feature_columns = []
//!
//! [dataset.synth]
//! length = 3000
//!
//! [window]
//! kappa = 192
//! horizons = [24, 48, 72, 96]
//! stride = 1
//! fractions = [0.8, 0.1, 0.1]
//!
//! [gp]
//! # inducing = 6                            # default max(4, tau / 4)
//! lengthscale = 0.2
//! amplitude = 0.05
//! noise = 0.01
//!
//! [training]
//! lambda = 0.001
//! batch_size = 256
//! epochs = 50
//! warmup_steps = 1000
//! ```
//!
//! Every key is optional; omitted keys take the defaults shown.

use std::path::{Path, PathBuf};

use fbd::data::{CsvColumns, DEFAULT_FRACTIONS};
use fbd::gp::GpInit;
use fbd::trainer::{AdamConfig, ElboSign, Selection, TrainConfig};
use fbd::{BackboneKind, SynthConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub backbone: BackboneKind,
    pub dataset: DatasetConfig,
    pub window: WindowConfig,
    pub gp: GpInit,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Label used in file names and result tables.
    pub name: String,
    /// CSV input; the synthetic generator is used when absent.
    pub csv: Option<PathBuf>,
    pub time_column: Option<String>,
    pub target_columns: Vec<String>,
    pub feature_columns: Vec<String>,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub kappa: usize,
    pub horizons: Vec<usize>,
    pub stride: usize,
    /// Train, validation and test fractions of the window sequence.
    pub fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_steps: u64,
    pub base_scale: f64,
    pub adam: AdamConfig,
    pub iso_sigma: f64,
    pub elbo_sign: ElboSign,
    pub selection: Selection,
    /// Train every cell of the backbone/warm-up grid and keep the one with
    /// the best validation MSE.
    pub search: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("results"),
            seeds: vec![0, 1, 2, 3, 4],
            variants: Variant::ALL.to_vec(),
            backbone: BackboneKind::LinearDirect,
            dataset: DatasetConfig::default(),
            window: WindowConfig::default(),
            gp: GpInit::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            name: "synth".into(),
            csv: None,
            time_column: None,
            target_columns: vec![],
            feature_columns: vec![],
            synth: SynthConfig::default(),
        }
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            kappa: 192,
            horizons: vec![24, 48, 72, 96],
            stride: 1,
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lambda: t.lambda,
            batch_size: t.batch_size,
            epochs: t.epochs,
            warmup_steps: t.warmup_steps,
            base_scale: t.base_scale,
            adam: t.adam,
            iso_sigma: t.iso_sigma,
            elbo_sign: t.elbo_sign,
            selection: t.selection,
            search: false,
        }
    }
}

impl DatasetConfig {
    pub fn csv_columns(&self) -> CsvColumns {
        CsvColumns {
            time: self.time_column.clone(),
            targets: self.target_columns.clone(),
            features: self.feature_columns.clone(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML without touching the file system.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Reads, resolves the CSV path against the file's directory and
    /// validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
            _ => CliError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(csv) = &cfg.dataset.csv {
            if csv.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.dataset.csv = Some(base.join(csv));
            }
        }
        // Absolute paths keep the copy written next to sweep results usable
        // from any working directory.
        if let Some(csv) = &cfg.dataset.csv {
            if let Ok(abs) = std::fs::canonicalize(csv) {
                cfg.dataset.csv = Some(abs);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.window.horizons.is_empty() {
            return bad("window.horizons must not be empty".into());
        }
        if self.window.horizons.contains(&0) || self.window.kappa == 0 || self.window.stride == 0 {
            return bad("window.kappa, window.stride and every horizon must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.variants.is_empty() {
            return bad("variants must not be empty".into());
        }
        if self.dataset.name.is_empty() || self.dataset.name.contains(['/', '\\']) {
            return bad("dataset.name must be a non-empty plain file name".into());
        }
        match &self.dataset.csv {
            Some(csv) => {
                if !csv.is_file() {
                    return Err(CliError::MissingInput(csv.clone()));
                }
                if self.dataset.target_columns.is_empty() {
                    return bad("dataset.target_columns must name at least one column".into());
                }
            }
            None => {
                let longest = self.window.horizons.iter().copied().max().unwrap_or(0);
                self.dataset.synth.validate_for(self.window.kappa, longest)?;
            }
        }
        self.train_config(Variant::Dg, 0).validate()?;
        Ok(())
    }

    pub fn train_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            lambda: t.lambda,
            batch_size: t.batch_size,
            epochs: t.epochs,
            warmup_steps: t.warmup_steps,
            base_scale: t.base_scale,
            adam: t.adam,
            seed,
            variant,
            backbone: self.backbone,
            gp: self.gp,
            iso_sigma: t.iso_sigma,
            elbo_sign: t.elbo_sign,
            selection: t.selection,
        }
    }
}
