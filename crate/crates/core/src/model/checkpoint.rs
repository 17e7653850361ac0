//! `SRKD1` checkpoint files: magic, u32 LE header length, JSON header, then
//! little-endian f64 tensor data. The header is space-padded so the data
//! section (and every tensor offset within it) starts on an 8-byte boundary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{ModelConfig, ModelParams};

const MAGIC: &[u8; 5] = b"SRKD1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    /// Offset from the start of the data section.
    byte_offset: u64,
}

pub fn write_checkpoint(params: &ModelParams, config: &ModelConfig, mut out: impl Write) -> Result<()> {
    let tensors = params.tensors();
    let mut offset = 0u64;
    let entries = params
        .names()
        .into_iter()
        .zip(&tensors)
        .map(|(name, t)| {
            let e = Entry {
                name,
                shape: t.shape().to_vec(),
                byte_offset: offset,
            };
            offset += 8 * t.numel() as u64;
            e
        })
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        tensors: entries,
    };
    let mut json = serde_json::to_vec(&header)?;
    while !(MAGIC.len() + 4 + json.len()).is_multiple_of(8) {
        json.push(b' ');
    }
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for t in tensors {
        for x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(mut input: impl Read) -> Result<(ModelParams, ModelConfig)> {
    let truncated = |what: &str| Error::load(format!("checkpoint truncated in {what}"));
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    if &magic != MAGIC {
        return Err(Error::load("not a checkpoint (bad magic)"));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len).map_err(|_| truncated("header length"))?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json).map_err(|_| truncated("header"))?;
    let header: Header = serde_json::from_slice(&json)
        .map_err(|e| Error::load(format!("bad checkpoint header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::load(format!(
            "unsupported checkpoint version {}",
            header.format_version
        )));
    }
    let config = header.config;
    config.validate().map_err(|e| Error::load(e.to_string()))?;
    let expected = config.tensor_shapes();
    if expected.len() != header.tensors.len() {
        return Err(Error::load(format!(
            "checkpoint lists {} tensors, config implies {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    let mut tensors = Vec::with_capacity(expected.len());
    let mut offset = 0u64;
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::load(format!(
                "tensor {} with shape {:?} where {name} {shape:?} was expected",
                entry.name, entry.shape
            )));
        }
        if entry.byte_offset != offset {
            return Err(Error::load(format!("tensor {name} has a bad byte offset")));
        }
        let numel: usize = shape.iter().product();
        let mut bytes = vec![0u8; 8 * numel];
        input
            .read_exact(&mut bytes)
            .map_err(|_| truncated(&format!("tensor {name}")))?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor::new(shape.clone(), data)?);
        offset += 8 * numel as u64;
    }
    let params = ModelParams::from_tensors(&config, tensors)?;
    Ok((params, config))
}

pub fn save_checkpoint(params: &ModelParams, config: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(params, config, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, ModelConfig)> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::load(format!("cannot open {}: {e}", path.display())))?;
    read_checkpoint(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, InitMode};

    fn sample() -> (ModelParams, ModelConfig) {
        let mut cfg = ModelConfig::new(1, 8, 2, 6, 12);
        cfg.tie_output = false;
        (init_params(&cfg, 9, InitMode::ScratchAll, None).unwrap(), cfg)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, cfg) = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&p, &cfg, &mut bytes).unwrap();
        let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        assert_eq!((9 + hlen) % 8, 0);
        let (q, cfg2) = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(p, q);
        let rebuilt = init_params(&cfg2, 0, InitMode::FromCheckpoint, Some(&q)).unwrap();
        let mut again = Vec::new();
        write_checkpoint(&rebuilt, &cfg2, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn corrupt_files_are_load_errors() {
        let (p, cfg) = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&p, &cfg, &mut bytes).unwrap();
        let err = read_checkpoint(&bytes[..bytes.len() - 3]).unwrap_err();
        assert_eq!(err.kind(), "load");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(read_checkpoint(bad.as_slice()).unwrap_err().kind(), "load");
        assert_eq!(read_checkpoint(&bytes[..7]).unwrap_err().kind(), "load");
    }
}
