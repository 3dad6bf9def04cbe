//! Parameter checkpoint archive.
//!
//! Single-file format: magic, version, a UTF-8 manifest blob (callers store
//! model configuration JSON there), then per parameter its name, shape, and
//! little-endian f32 values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::params::ParamSet;
use crate::{Result, TapeError, Tensor};

const MAGIC: &[u8; 4] = b"TGCK";
const VERSION: u32 = 1;

pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn save(path: &Path, manifest: &str, params: &ParamSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let mbytes = manifest.as_bytes();
    w.write_all(&(mbytes.len() as u64).to_le_bytes())?;
    w.write_all(mbytes)?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for (_, p) in params.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(p.value.shape().len() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in p.value.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(String, Vec<CheckpointEntry>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TapeError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TapeError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let mlen = read_u64(&mut r)? as usize;
    let mut mbytes = vec![0u8; mlen];
    r.read_exact(&mut mbytes)?;
    let manifest = String::from_utf8(mbytes)
        .map_err(|e| TapeError::Checkpoint(format!("manifest not utf-8: {e}")))?;
    let count = read_u64(&mut r)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = read_u64(&mut r)? as usize;
        let mut nbytes = vec![0u8; nlen];
        r.read_exact(&mut nbytes)?;
        let name = String::from_utf8(nbytes)
            .map_err(|e| TapeError::Checkpoint(format!("name not utf-8: {e}")))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut values = Vec::with_capacity(numel);
        let mut buf = [0u8; 4];
        for _ in 0..numel {
            r.read_exact(&mut buf)?;
            values.push(f32::from_le_bytes(buf));
        }
        entries.push(CheckpointEntry {
            name,
            shape,
            values,
        });
    }
    Ok((manifest, entries))
}

/// Copy checkpoint values into an existing parameter set, matching by name.
/// Every parameter must be present with a matching shape.
pub fn restore(params: &mut ParamSet, entries: &[CheckpointEntry]) -> Result<()> {
    for entry in entries {
        let id = params.id_of(&entry.name).ok_or_else(|| {
            TapeError::Checkpoint(format!("parameter {} not in model", entry.name))
        })?;
        if params.value(id).shape() != entry.shape.as_slice() {
            return Err(TapeError::Checkpoint(format!(
                "parameter {} shape {:?} does not match checkpoint {:?}",
                entry.name,
                params.value(id).shape(),
                entry.shape
            )));
        }
        let t = Tensor::new(
            entry.shape.clone(),
            entry.values.iter().map(|&v| v as f64).collect(),
        )?;
        params.get_mut(id).value = t;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
