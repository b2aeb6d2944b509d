//! Checkpoint file (`MFMC`, little-endian): magic, version `u32`, a JSON
//! header string, parameter count `u32`, then per parameter its name, rank
//! `u32`, dims `u32` each and `f64` values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::network::{build_model, MfmgcnModel};
use crate::binfmt::{self, ReadLe, WriteLe, LE};
use crate::data::NormStats;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MFMC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    /// Input factors in channel order, target first.
    pub factors: Vec<String>,
    pub norm: Option<NormStats>,
    pub producer_version: String,
}

pub fn save_checkpoint(
    model: &MfmgcnModel,
    header: &CheckpointHeader,
    path: &Path,
) -> Result<()> {
    if header.model != model.config {
        return Err(Error::Config("checkpoint header does not describe this model".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(model, header, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint(model: &MfmgcnModel, header: &CheckpointHeader, w: &mut impl Write) -> Result<()> {
    binfmt::write_magic(w, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    binfmt::write_str(w, &serde_json::to_string(header)?)?;
    w.write_u32::<LE>(model.store.len() as u32)?;
    for (_, p) in model.store.iter() {
        binfmt::write_str(w, &p.name)?;
        w.write_u32::<LE>(p.value.ndim() as u32)?;
        for &d in p.value.shape() {
            w.write_u32::<LE>(d as u32)?;
        }
        binfmt::write_f64s(w, p.value.iter().copied())?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(MfmgcnModel, CheckpointHeader)> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

/// Rebuilds the model from the stored config, then overwrites every
/// parameter; names and shapes must match exactly.
pub fn read_checkpoint(r: &mut impl Read) -> Result<(MfmgcnModel, CheckpointHeader)> {
    let version = binfmt::read_magic(r, CHECKPOINT_MAGIC)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version(format!(
            "checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"
        )));
    }
    let raw = binfmt::read_str(r)?;
    let header: CheckpointHeader = serde_json::from_str(&raw)
        .map_err(|e| Error::Version(format!("checkpoint header incompatible with this build: {e}")))?;
    let mut model = build_model(&header.model)?;
    let count = r.read_u32::<LE>()? as usize;
    if count != model.store.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} parameters, model expects {}",
            model.store.len()
        )));
    }
    for _ in 0..count {
        let name = binfmt::read_str(r)?;
        let id = model
            .store
            .id_of(&name)
            .ok_or_else(|| Error::Format(format!("unknown parameter {name}")))?;
        let rank = r.read_u32::<LE>()? as usize;
        let shape = (0..rank)
            .map(|_| r.read_u32::<LE>().map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        if shape != model.store.get(id).shape() {
            return Err(Error::Format(format!(
                "parameter {name} has shape {shape:?}, model expects {:?}",
                model.store.get(id).shape()
            )));
        }
        let vals = binfmt::read_f64s(r, shape.iter().product())?;
        *model.store.get_mut(id) = ArrayD::from_shape_vec(IxDyn(&shape), vals).expect("length read");
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok((model, header))
}
