//! Named parameter archives.
//!
//! Layout (little endian): the magic `GRAPHAE1`, a `u64` length and that many
//! bytes of JSON [`CheckpointMeta`], a `u32` tensor count, then per tensor a
//! `u32`-prefixed UTF-8 name, a `u32` rank, `u64` dims and the raw `f32`
//! values. Batch-norm running statistics are stored like any parameter.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use graphae_core::model::{AutoEncoder, BaselineConfig, BaselineModel, ModelConfig};
use graphae_core::nn::{Module, Param};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunMode;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GRAPHAE1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub mode: RunMode,
    /// Last completed epoch; 0 for an untrained model.
    pub epoch: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone)]
pub enum LoadedModel {
    SelfSupervised(AutoEncoder),
    Baseline(BaselineModel),
}

fn collect<M: Module + ?Sized>(model: &mut M) -> Vec<(String, Vec<usize>, Vec<f32>)> {
    let mut out = Vec::new();
    model.visit_params("", &mut |name, p: &mut Param| {
        out.push((name.to_string(), p.shape.clone(), p.value.clone()));
    });
    out
}

pub fn to_bytes<M: Module + ?Sized>(meta: &CheckpointMeta, model: &mut M) -> Vec<u8> {
    let json = serde_json::to_vec(meta).expect("metadata serializes");
    let tensors = collect(model);
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, values) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Writes via a temporary file and a rename, so an interrupted save never
/// replaces a good checkpoint with a truncated one.
pub fn save<M: Module + ?Sized>(path: &Path, meta: &CheckpointMeta, model: &mut M) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = fs::File::create(&tmp).map_err(Error::io(&tmp))?;
    f.write_all(&to_bytes(meta, model)).map_err(Error::io(&tmp))?;
    f.sync_all().map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

struct Archive {
    meta: CheckpointMeta,
    tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
}

fn parse(path: &Path, bytes: &[u8]) -> Result<Archive> {
    let mut r = bytes;
    let err = |m: &str| Error::format(path, format!("corrupt checkpoint: {m}"));
    let mut take = |n: usize| -> Result<&[u8]> {
        if r.len() < n {
            return Err(err("unexpected end of file"));
        }
        let (head, tail) = r.split_at(n);
        r = tail;
        Ok(head)
    };
    if take(8)? != MAGIC {
        return Err(err("bad magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap()) as usize;
    let json_len = u64_at(take(8)?);
    let meta: CheckpointMeta = serde_json::from_slice(take(json_len)?).map_err(|e| Error::format(path, e))?;
    let count = u32_at(take(4)?);
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = u32_at(take(4)?);
        let name = String::from_utf8(take(name_len)?.to_vec()).map_err(|_| err("tensor name is not UTF-8"))?;
        let rank = u32_at(take(4)?);
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64_at(take(8)?));
        }
        let len: usize = shape.iter().product();
        let values = take(len * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.insert(name, (shape, values));
    }
    Ok(Archive { meta, tensors })
}

fn restore<M: Module + ?Sized>(
    path: &Path,
    model: &mut M,
    mut tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
) -> Result<()> {
    let mut problem = None;
    model.visit_params("", &mut |name, p: &mut Param| {
        if problem.is_some() {
            return;
        }
        match tensors.remove(name) {
            Some((shape, values)) if shape == p.shape => p.value = values,
            Some((shape, _)) => problem = Some(format!("{name}: stored shape {shape:?}, model expects {:?}", p.shape)),
            None => problem = Some(format!("missing tensor {name}")),
        }
    });
    if let Some(m) = problem {
        return Err(Error::format(path, m));
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::format(path, format!("unexpected tensor {extra}")));
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<(CheckpointMeta, LoadedModel)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(Error::io(path))?;
    let archive = parse(path, &bytes)?;
    let meta = archive.meta;
    // initial values are overwritten; the rng only has to exist
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = match meta.mode {
        RunMode::SelfSupervised => {
            let mut m = AutoEncoder::new(meta.model.clone(), &mut rng)?;
            restore(path, &mut m, archive.tensors)?;
            LoadedModel::SelfSupervised(m)
        }
        RunMode::Baseline => {
            let mut m = BaselineModel::new(meta.model.encoder.clone(), meta.baseline, &mut rng);
            restore(path, &mut m, archive.tensors)?;
            LoadedModel::Baseline(m)
        }
    };
    Ok((meta, model))
}
