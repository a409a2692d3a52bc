//! Binary checkpoint format.
//!
//! Layout: magic `SLAD`, format version u32 LE, then length-prefixed named
//! sections (name length u32, name bytes, payload length u64, payload).
//! Sections: `meta` (JSON), `theta` and `theta_ema` (tensor tables).
//! Tensor data is stored as little-endian f32 and upcast to f64 on load, so
//! a save/load round trip reproduces parameters at exactly 32-bit
//! precision.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DatasetConfig;
use crate::error::{Error, Result};
use crate::net::{NetConfig, Param, ParamStore};
use crate::schedule::ScheduleConfig;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SLAD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub format_version: u32,
    /// SHA-256 of the resolved config that produced this run.
    pub config_hash: String,
    pub seed: u64,
    /// (purpose, derived seed) pairs documenting the streams the run used.
    pub seed_lineage: Vec<(String, u64)>,
    pub schedule: ScheduleConfig,
    pub net: NetConfig,
    pub dataset: DatasetConfig,
    /// Gamma-embedding convention tag.
    pub gamma_convention: String,
    /// Training step the checkpoint was written at.
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub theta: ParamStore,
    pub theta_minus: ParamStore,
}

fn push_section(out: &mut Vec<u8>, name: &str, payload: &[u8]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn encode_params(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, param) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(param.trainable as u8);
        out.extend_from_slice(&(param.value.shape().len() as u32).to_le_bytes());
        for &d in param.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in param.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("non-utf8 name".into()))
    }

    fn done(&self) -> bool {
        self.at >= self.buf.len()
    }
}

fn decode_params(buf: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { buf, at: 0 };
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = r.string()?;
        let trainable = r.take(1)?[0] != 0;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let raw = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
            data.push(raw as f64);
        }
        store.insert(&name, Tensor::new(shape, data), trainable);
    }
    Ok(store)
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    push_section(&mut out, "meta", serde_json::to_string(&ckpt.meta)?.as_bytes());
    push_section(&mut out, "theta", &encode_params(&ckpt.theta));
    push_section(&mut out, "theta_ema", &encode_params(&ckpt.theta_minus));
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let buf = fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if buf.len() < 8 || &buf[0..4] != MAGIC {
        return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: format version {version}, expected {FORMAT_VERSION}",
            path.display()
        )));
    }
    let mut r = Reader { buf: &buf, at: 8 };
    let mut sections: BTreeMap<String, &[u8]> = BTreeMap::new();
    while !r.done() {
        let name = r.string()?;
        let len = r.u64()? as usize;
        sections.insert(name, r.take(len)?);
    }
    let meta_bytes = sections
        .get("meta")
        .ok_or_else(|| Error::Checkpoint("missing meta section".into()))?;
    let meta: CheckpointMeta = serde_json::from_slice(meta_bytes)?;
    let theta = decode_params(
        sections
            .get("theta")
            .ok_or_else(|| Error::Checkpoint("missing theta section".into()))?,
    )?;
    let theta_minus = decode_params(
        sections
            .get("theta_ema")
            .ok_or_else(|| Error::Checkpoint("missing theta_ema section".into()))?,
    )?;
    Ok(Checkpoint { meta, theta, theta_minus })
}

/// Loads a checkpoint for resuming: refuses when the stored config hash
/// differs from the current resolved config's hash.
pub fn load_for_resume(path: &Path, expected_hash: &str) -> Result<Checkpoint> {
    let ckpt = load(path)?;
    if ckpt.meta.config_hash != expected_hash {
        return Err(Error::Checkpoint(format!(
            "{}: config hash mismatch on resume (checkpoint {}, current {expected_hash})",
            path.display(),
            ckpt.meta.config_hash
        )));
    }
    Ok(ckpt)
}

/// What a store looks like after one disk round trip.
pub fn quantize_store(store: &ParamStore) -> ParamStore {
    let mut out = ParamStore::new();
    for (name, Param { value, trainable }) in store.iter() {
        out.insert(name, value.map(|v| (v as f32) as f64), *trainable);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_denoiser;

    fn sample_checkpoint() -> Checkpoint {
        let net = NetConfig {
            data_dim: 2,
            width: 8,
            n_classes: 3,
            class_embed_dim: 2,
            t_frequencies: 4,
            gamma_frequencies: 2,
        };
        let theta = init_denoiser(&net, 1);
        let theta_minus = init_denoiser(&net, 2);
        Checkpoint {
            meta: CheckpointMeta {
                format_version: FORMAT_VERSION,
                config_hash: "abc123".into(),
                seed: 7,
                seed_lineage: vec![("teacher_step".into(), 42)],
                schedule: ScheduleConfig::default(),
                net,
                dataset: DatasetConfig::default(),
                gamma_convention: crate::net::GAMMA_CONVENTION.into(),
                step: 100,
            },
            theta,
            theta_minus,
        }
    }

    #[test]
    fn roundtrip_is_exact_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.slad");
        let ckpt = sample_checkpoint();
        save(&path, &ckpt).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.meta, ckpt.meta);
        assert_eq!(loaded.theta, quantize_store(&ckpt.theta));
        assert_eq!(loaded.theta_minus, quantize_store(&ckpt.theta_minus));
        // a second round trip is bit-stable
        let path2 = dir.path().join("test2.slad");
        save(&path2, &loaded).unwrap();
        let again = load(&path2).unwrap();
        assert_eq!(again.theta, loaded.theta);
        assert_eq!(fs::read(&path2).unwrap().len(), fs::read(&path).unwrap().len());
    }

    #[test]
    fn magic_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.slad");
        fs::write(&path, b"NOPExxxxxxxx").unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn resume_refuses_on_hash_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.slad");
        let ckpt = sample_checkpoint();
        save(&path, &ckpt).unwrap();
        assert!(load_for_resume(&path, "abc123").is_ok());
        let err = load_for_resume(&path, "different").unwrap_err();
        assert!(err.to_string().contains("hash mismatch"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.slad");
        let b = dir.path().join("b.slad");
        let ckpt = sample_checkpoint();
        save(&a, &ckpt).unwrap();
        save(&b, &ckpt).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
}
