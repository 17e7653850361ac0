//! Binary dataset artifact.
//!
//! ```text
//! b"SRDS1"
//! u32 LE   header length in bytes
//! [u8]     UTF-8 JSON header
//! u32 LE   per user: max_len training tokens, then val, then test
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{SplitDataset, UserSplit};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"SRDS1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub vocab_size: usize,
    pub max_len: usize,
    pub seed: u64,
    pub user_count: usize,
    pub format: String,
    /// Tokens per user record (`max_len + 2`).
    pub record_len: usize,
    pub users: Vec<String>,
}

pub fn write_dataset(dataset: &SplitDataset, mut out: impl Write) -> Result<()> {
    let header = DatasetHeader {
        vocab_size: dataset.vocab_size,
        max_len: dataset.max_len,
        seed: dataset.seed,
        user_count: dataset.users.len(),
        format: dataset.provenance.clone(),
        record_len: dataset.max_len + 2,
        users: dataset.users.iter().map(|u| u.user.clone()).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(9 + json.len() + 4 * header.record_len * header.user_count);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for u in &dataset.users {
        for &t in u.train.iter().chain([&u.val, &u.test]) {
            buf.extend_from_slice(&t.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_dataset(mut input: impl Read) -> Result<SplitDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(Error::load("not a dataset artifact (bad magic)"));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body_start = 9 + header_len;
    if bytes.len() < body_start {
        return Err(Error::load("dataset header truncated"));
    }
    let header: DatasetHeader = serde_json::from_slice(&bytes[9..body_start])?;
    if header.record_len != header.max_len + 2 || header.users.len() != header.user_count {
        return Err(Error::load("dataset header is inconsistent"));
    }
    let body = &bytes[body_start..];
    if body.len() != 4 * header.record_len * header.user_count {
        return Err(Error::load(format!(
            "dataset body has {} bytes, expected {}",
            body.len(),
            4 * header.record_len * header.user_count
        )));
    }
    let tokens: Vec<u32> = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(bad) = tokens.iter().find(|&&t| t as usize >= header.vocab_size) {
        return Err(Error::load(format!("token {bad} outside vocabulary")));
    }
    let users = tokens
        .chunks_exact(header.record_len)
        .zip(&header.users)
        .map(|(rec, user)| UserSplit {
            user: user.clone(),
            train: rec[..header.max_len].to_vec(),
            val: rec[header.max_len],
            test: rec[header.max_len + 1],
        })
        .collect();
    Ok(SplitDataset {
        max_len: header.max_len,
        vocab_size: header.vocab_size,
        seed: header.seed,
        provenance: header.format,
        users,
    })
}

impl SplitDataset {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        write_dataset(self, std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        read_dataset(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SplitDataset {
        SplitDataset {
            max_len: 3,
            vocab_size: 6,
            seed: 4,
            provenance: "tsv".into(),
            users: vec![
                UserSplit { user: "a".into(), train: vec![0, 2, 3], val: 4, test: 5 },
                UserSplit { user: "b".into(), train: vec![5, 4, 3], val: 2, test: 2 },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_dataset(&sample(), &mut buf).unwrap();
        assert_eq!(&buf[..5], b"SRDS1");
        assert_eq!(read_dataset(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn truncated_body_rejected() {
        let mut buf = Vec::new();
        write_dataset(&sample(), &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_dataset(&buf[..]), Err(Error::Load(_))));
        assert!(matches!(read_dataset(&b"SRKD1...."[..]), Err(Error::Load(_))));
    }
}
