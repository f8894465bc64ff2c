//! Binary checkpoint format.
//!
//! ```text
//! "FBD1"                      4 bytes
//! sha256(config JSON)         32 bytes
//! metadata length, JSON       u64 LE + bytes
//! blocks                      each: u64 LE count + count f64 LE
//!   forecaster, denoiser, blur, adam m, adam v, history
//! ```
//!
//! GP blur parameters are stored with the raw Cholesky diagonal (not its
//! log) so a load reproduces the saved values bit for bit.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{AdamState, Checkpoint, EpochMetrics, TrainConfig};
use crate::backbone::ModelParams;
use crate::gp::GpParams;
use crate::pipeline::{BlurParams, Dims, PipelineParams, Variant};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FBD1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("config hash does not match the stored config")]
    HashMismatch,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
enum BlurMeta {
    None,
    Gp { inducing: usize },
    Isotropic,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    variant: Variant,
    dims: Dims,
    forecaster: ModelParams,
    denoiser: Option<ModelParams>,
    blur: BlurMeta,
    adam_step: u64,
    epoch: usize,
    config: TrainConfig,
}

const HISTORY_WIDTH: usize = 4;

fn blur_block(blur: &BlurParams) -> Vec<f64> {
    match blur {
        BlurParams::None => vec![],
        BlurParams::Isotropic(s) => vec![*s],
        BlurParams::Gp(p) => {
            let mut out = vec![p.log_lengthscale, p.log_amplitude, p.log_noise];
            out.extend(&p.inducing);
            out.extend(&p.var_mean);
            let m = p.num_inducing();
            for i in 0..m {
                for j in 0..=i {
                    out.push(p.var_chol[[i, j]]);
                }
            }
            out
        }
    }
}

fn gp_from_block(m: usize, v: &[f64]) -> Result<GpParams, CheckpointError> {
    if v.len() != GpParams::flat_len(m) {
        return Err(CheckpointError::Malformed("blur block length".into()));
    }
    let mut chol = Array2::zeros((m, m));
    let mut k = 3 + 2 * m;
    for i in 0..m {
        for j in 0..=i {
            chol[[i, j]] = v[k];
            k += 1;
        }
    }
    Ok(GpParams {
        log_lengthscale: v[0],
        log_amplitude: v[1],
        log_noise: v[2],
        inducing: v[3..3 + m].to_vec(),
        var_mean: v[3 + m..3 + 2 * m].to_vec(),
        var_chol: chol,
    })
}

fn write_block(w: &mut impl Write, values: &[f64]) -> io::Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_block(r: &mut impl Read) -> Result<Vec<f64>, CheckpointError> {
    let n = read_u64(r)? as usize;
    if n > (1 << 32) {
        return Err(CheckpointError::Malformed("block too large".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn with_values(mut shape: ModelParams, values: Vec<f64>) -> Result<ModelParams, CheckpointError> {
    let expected: usize = shape.shapes.iter().map(|(_, d)| d.iter().product::<usize>()).sum();
    if values.len() != expected {
        return Err(CheckpointError::Malformed(format!(
            "expected {expected} model values, got {}",
            values.len()
        )));
    }
    shape.values = values;
    Ok(shape)
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), CheckpointError> {
        let p = &self.params;
        let meta = Metadata {
            variant: p.variant,
            dims: p.dims,
            forecaster: p.forecaster.clone(),
            denoiser: p.denoiser.clone(),
            blur: match &p.blur {
                BlurParams::None => BlurMeta::None,
                BlurParams::Gp(g) => BlurMeta::Gp {
                    inducing: g.num_inducing(),
                },
                BlurParams::Isotropic(_) => BlurMeta::Isotropic,
            },
            adam_step: self.adam.step,
            epoch: self.epoch,
            config: self.config.clone(),
        };
        let config_json = serde_json::to_vec(&self.config).expect("config serializes");
        let meta_json = serde_json::to_vec(&meta).expect("metadata serializes");
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&Sha256::digest(&config_json))?;
        w.write_all(&(meta_json.len() as u64).to_le_bytes())?;
        w.write_all(&meta_json)?;
        write_block(w, &p.forecaster.values)?;
        write_block(w, p.denoiser.as_ref().map_or(&[][..], |d| &d.values))?;
        write_block(w, &blur_block(&p.blur))?;
        write_block(w, &self.adam.m)?;
        write_block(w, &self.adam.v)?;
        let history: Vec<f64> = self
            .history
            .iter()
            .flat_map(|h| [h.epoch as f64, h.train_loss, h.train_mse, h.val_mse])
            .collect();
        write_block(w, &history)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        let meta_len = read_u64(r)? as usize;
        if meta_len > (1 << 26) {
            return Err(CheckpointError::Malformed("metadata too large".into()));
        }
        let mut meta_json = vec![0u8; meta_len];
        r.read_exact(&mut meta_json)?;
        let meta: Metadata =
            serde_json::from_slice(&meta_json).map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
        if meta.config.hash() != hash {
            return Err(CheckpointError::HashMismatch);
        }
        let forecaster = with_values(meta.forecaster, read_block(r)?)?;
        let denoiser_values = read_block(r)?;
        let denoiser = match meta.denoiser {
            Some(d) => Some(with_values(d, denoiser_values)?),
            None if denoiser_values.is_empty() => None,
            None => return Err(CheckpointError::Malformed("unexpected denoiser block".into())),
        };
        let blur_values = read_block(r)?;
        let blur = match meta.blur {
            BlurMeta::None if blur_values.is_empty() => BlurParams::None,
            BlurMeta::Isotropic if blur_values.len() == 1 => BlurParams::Isotropic(blur_values[0]),
            BlurMeta::Gp { inducing } => BlurParams::Gp(gp_from_block(inducing, &blur_values)?),
            _ => return Err(CheckpointError::Malformed("blur block length".into())),
        };
        let params = PipelineParams {
            variant: meta.variant,
            dims: meta.dims,
            forecaster,
            denoiser,
            blur,
        };
        let m = read_block(r)?;
        let v = read_block(r)?;
        if m.len() != params.len() || v.len() != params.len() {
            return Err(CheckpointError::Malformed("optimizer state length".into()));
        }
        let raw_history = read_block(r)?;
        if raw_history.len() % HISTORY_WIDTH != 0 {
            return Err(CheckpointError::Malformed("history block length".into()));
        }
        let history = raw_history
            .chunks(HISTORY_WIDTH)
            .map(|c| EpochMetrics {
                epoch: c[0] as usize,
                train_loss: c[1],
                train_mse: c[2],
                val_mse: c[3],
            })
            .collect();
        Ok(Checkpoint {
            config: meta.config,
            params,
            adam: AdamState {
                m,
                v,
                step: meta.adam_step,
            },
            epoch: meta.epoch,
            history,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, CheckpointError> {
        Self::read_from(&mut bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneKind;
    use crate::gp::GpInit;
    use crate::numerics::RngStream;

    fn sample(variant: Variant, kind: BackboneKind) -> Checkpoint {
        let dims = Dims {
            kappa: 6,
            tau: 4,
            d_x: 2,
            d_y: 1,
        };
        let mut rng = RngStream::new(3, 0);
        let mut params = PipelineParams::init(variant, kind, dims, &GpInit::default(), 0.05, &mut rng).unwrap();
        let flat: Vec<f64> = params.to_flat().iter().map(|v| v + rng.uniform(-0.1, 0.1)).collect();
        params.set_flat(&flat).unwrap();
        let n = params.len();
        Checkpoint {
            config: TrainConfig {
                variant,
                backbone: kind,
                ..TrainConfig::default()
            },
            params,
            adam: AdamState {
                m: (0..n).map(|i| i as f64 * 1e-3).collect(),
                v: (0..n).map(|i| (i as f64).sqrt() * 1e-7).collect(),
                step: 17,
            },
            epoch: 2,
            history: vec![
                EpochMetrics {
                    epoch: 1,
                    train_loss: 0.5,
                    train_mse: 0.4,
                    val_mse: f64::NAN,
                },
                EpochMetrics {
                    epoch: 2,
                    train_loss: 0.1 + 0.2,
                    train_mse: 1.0 / 3.0,
                    val_mse: 0.25,
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for variant in Variant::ALL {
            for kind in [BackboneKind::LinearDirect, BackboneKind::Mlp { hidden: 4, layers: 2 }] {
                let ckpt = sample(variant, kind);
                let bytes = ckpt.to_bytes();
                let back = Checkpoint::from_bytes(&bytes).unwrap();
                assert_eq!(back.to_bytes(), bytes);
                assert_eq!(back.params, ckpt.params);
                assert_eq!(back.adam, ckpt.adam);
                assert!(back.history[0].val_mse.is_nan());
                assert_eq!(back.history[1], ckpt.history[1]);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ckpt = sample(Variant::Dg, BackboneKind::LinearDirect);
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap().to_bytes(), ckpt.to_bytes());
    }

    #[test]
    fn header_layout() {
        let ckpt = sample(Variant::Di, BackboneKind::LinearDirect);
        let bytes = ckpt.to_bytes();
        assert_eq!(&bytes[..4], b"FBD1");
        assert_eq!(&bytes[4..36], &ckpt.config_hash());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = sample(Variant::Dt, BackboneKind::LinearDirect).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));
        let mut bad = bytes.clone();
        bad[10] ^= 1;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(CheckpointError::HashMismatch)
        ));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(matches!(
            Checkpoint::load("/nonexistent/x.ckpt"),
            Err(CheckpointError::Io { .. })
        ));
    }
}
