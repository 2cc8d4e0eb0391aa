//! Flat named-tensor checkpoint container.
//!
//! Byte layout, in order:
//!
//! 1. magic `b"HYKINCKPT1\n"`;
//! 2. manifest byte length as a little-endian `u64`;
//! 3. the manifest: UTF-8 JSON `{"version": 1, "config": …, "params": […]}`
//!    where each params entry is `{"name", "shape", "offset", "len"}` with
//!    `offset`/`len` counted in f64 elements from the start of the payload;
//! 4. the payload: all tensor values as little-endian f64, concatenated in
//!    manifest order.
//!
//! Values round-trip bit-exactly. `config` carries the run configuration as
//! arbitrary JSON so a checkpoint is self-describing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::ParamStore;

const MAGIC: &[u8] = b"HYKINCKPT1\n";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: serde_json::Value,
    params: Vec<ParamRecord>,
}

#[derive(Serialize, Deserialize, Clone)]
struct ParamRecord {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

/// A loaded checkpoint: run config plus named tensors.
pub struct Checkpoint {
    config: serde_json::Value,
    params: Vec<ParamRecord>,
    payload: Vec<f64>,
}

/// Write every parameter of `store` plus the run `config` to `path`.
pub fn save(path: &Path, store: &ParamStore, config: &serde_json::Value) -> Result<()> {
    let mut params = Vec::new();
    let mut payload: Vec<f64> = Vec::new();
    for (name, shape, _group, values) in store.iter() {
        params.push(ParamRecord {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset: payload.len(),
            len: values.len(),
        });
        payload.extend_from_slice(values);
    }
    let manifest = serde_json::to_vec(&Manifest {
        version: VERSION,
        config: config.clone(),
        params,
    })?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(&manifest)?;
    for v in &payload {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save`].
pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let mut r = BufReader::new(file);
    let mut magic = vec![0u8; MAGIC.len()];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint(format!("{}: truncated header", path.display())))?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic (not a checkpoint file)",
            path.display()
        )));
    }
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)
        .map_err(|_| Error::Checkpoint(format!("{}: truncated manifest length", path.display())))?;
    let mlen = u64::from_le_bytes(len8) as usize;
    let mut mbytes = vec![0u8; mlen];
    r.read_exact(&mut mbytes)
        .map_err(|_| Error::Checkpoint(format!("{}: truncated manifest", path.display())))?;
    let manifest: Manifest = serde_json::from_slice(&mbytes)?;
    if manifest.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported version {}",
            path.display(),
            manifest.version
        )));
    }
    let total: usize = manifest.params.iter().map(|p| p.len).sum();
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != total * 8 {
        return Err(Error::Checkpoint(format!(
            "{}: payload holds {} bytes, manifest expects {}",
            path.display(),
            raw.len(),
            total * 8
        )));
    }
    let payload: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    for p in &manifest.params {
        let numel: usize = p.shape.iter().product::<usize>().max(1);
        if p.len != numel || p.offset + p.len > payload.len() {
            return Err(Error::Checkpoint(format!(
                "{}: entry {} is inconsistent (shape {:?}, len {}, offset {})",
                path.display(),
                p.name,
                p.shape,
                p.len,
                p.offset
            )));
        }
    }
    Ok(Checkpoint {
        config: manifest.config,
        params: manifest.params,
        payload,
    })
}

impl Checkpoint {
    pub fn config(&self) -> &serde_json::Value {
        &self.config
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.iter().any(|p| p.name == name)
    }

    /// Values and shape of one named tensor.
    pub fn tensor(&self, name: &str) -> Result<(&[f64], &[usize])> {
        let p = self
            .params
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("no tensor named {name}")))?;
        Ok((&self.payload[p.offset..p.offset + p.len], &p.shape))
    }

    /// Copy every stored tensor into `store`. The store must already declare
    /// each name with a matching shape; names in the store but not here (or
    /// vice versa) are an error, so a restore is all-or-nothing.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "store declares {} parameters, checkpoint holds {}",
                store.len(),
                self.params.len()
            )));
        }
        for p in &self.params {
            if !store.contains(&p.name) {
                return Err(Error::Checkpoint(format!(
                    "store does not declare parameter {}",
                    p.name
                )));
            }
            if store.shape(&p.name)? != p.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "{}: shape {:?} in store, {:?} in checkpoint",
                    p.name,
                    store.shape(&p.name)?,
                    p.shape
                )));
            }
        }
        for p in &self.params {
            store.set_values(&p.name, self.payload[p.offset..p.offset + p.len].to_vec())?;
        }
        Ok(())
    }
}
