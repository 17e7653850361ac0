use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::tensor::Tensor;

use super::{ModelConfig, ModelParams};

pub const INIT_STD: f64 = 0.02;

/// Which parts of a checkpoint to keep when building params.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    ScratchAll,
    /// Fresh embeddings; encoder layers and head bias from the checkpoint.
    ScratchEmbed,
    /// Fresh encoder layers; embeddings and head from the checkpoint.
    ScratchLayer,
    FromCheckpoint,
}

impl InitMode {
    pub const ALL: [InitMode; 4] = [
        InitMode::ScratchAll,
        InitMode::ScratchEmbed,
        InitMode::ScratchLayer,
        InitMode::FromCheckpoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitMode::ScratchAll => "scratch_all",
            InitMode::ScratchEmbed => "scratch_embed",
            InitMode::ScratchLayer => "scratch_layer",
            InitMode::FromCheckpoint => "from_checkpoint",
        }
    }

    fn keeps(self, name: &str) -> bool {
        let embed = name.starts_with("embeddings.");
        let layer = name.starts_with("layers.");
        match self {
            InitMode::ScratchAll => false,
            InitMode::ScratchEmbed => !embed,
            InitMode::ScratchLayer => !layer,
            InitMode::FromCheckpoint => true,
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param(format!("unknown init mode {s:?}")))
    }
}

fn truncated_normal(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    Tensor::from_fn(shape.to_vec(), |_| loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * INIT_STD {
            break x;
        }
    })
}

fn fresh_tensor(name: &str, shape: &[usize], seed: u64, index: u64) -> Tensor {
    if name.ends_with(".gamma") {
        Tensor::full(shape.to_vec(), 1.0)
    } else if name.ends_with(".beta") || name.ends_with(".bias") {
        Tensor::zeros(shape.to_vec())
    } else {
        truncated_normal(shape, &mut stream(seed, &[domain::INIT, index]))
    }
}

/// Vocabulary-indexed tensors may change row count between checkpoint and
/// config: extra rows are dropped, missing rows keep their fresh values.
fn is_vocab_indexed(name: &str) -> bool {
    matches!(name, "embeddings.token" | "head.bias" | "head.weight")
}

fn copy_from(name: &str, fresh: &mut Tensor, saved: &Tensor) -> Result<()> {
    let (fs, ss) = (fresh.shape().to_vec(), saved.shape());
    let same_tail = fs.len() == ss.len() && fs[1..] == ss[1..];
    if fs.as_slice() == ss {
        fresh.data_mut().copy_from_slice(saved.data());
        Ok(())
    } else if is_vocab_indexed(name) && same_tail {
        let per_row: usize = fs[1..].iter().product();
        let n = fs[0].min(ss[0]) * per_row;
        fresh.data_mut()[..n].copy_from_slice(&saved.data()[..n]);
        Ok(())
    } else {
        Err(Error::load(format!(
            "tensor {name}: checkpoint shape {ss:?} does not fit config shape {fs:?}"
        )))
    }
}

/// Builds params for `config`. Scratch parts use a truncated normal
/// (σ = 0.02, cut at 2σ), layer norms start at γ = 1, β = 0 and biases at 0.
/// Every mode other than `ScratchAll` needs `checkpoint`.
pub fn init_params(
    config: &ModelConfig,
    seed: u64,
    mode: InitMode,
    checkpoint: Option<&ModelParams>,
) -> Result<ModelParams> {
    config.validate()?;
    let shapes = config.tensor_shapes();
    let mut tensors: Vec<Tensor> = shapes
        .iter()
        .enumerate()
        .map(|(i, (name, shape))| fresh_tensor(name, shape, seed, i as u64))
        .collect();
    if mode != InitMode::ScratchAll {
        let ckpt = checkpoint.ok_or_else(|| {
            Error::param(format!("init mode {mode} requires a checkpoint"))
        })?;
        let saved: HashMap<String, &Tensor> = ckpt.names().into_iter().zip(ckpt.tensors()).collect();
        if saved.len() != shapes.len() {
            return Err(Error::load(format!(
                "checkpoint has {} tensors, config expects {}",
                saved.len(),
                shapes.len()
            )));
        }
        for ((name, _), t) in shapes.iter().zip(tensors.iter_mut()) {
            let src = saved
                .get(name)
                .ok_or_else(|| Error::load(format!("tensor {name} missing from checkpoint")))?;
            // Shapes are validated even for parts that will be re-drawn.
            let mut probe = t.clone();
            copy_from(name, &mut probe, src)?;
            if mode.keeps(name) {
                *t = probe;
            }
        }
    }
    ModelParams::from_tensors(config, tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(vocab: usize) -> ModelConfig {
        ModelConfig::new(2, 8, 2, 6, vocab)
    }

    #[test]
    fn scratch_is_seed_deterministic_and_truncated() {
        let a = init_params(&cfg(12), 4, InitMode::ScratchAll, None).unwrap();
        let b = init_params(&cfg(12), 4, InitMode::ScratchAll, None).unwrap();
        let c = init_params(&cfg(12), 5, InitMode::ScratchAll, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.token_embedding.data().iter().all(|x| x.abs() <= 0.04));
        assert!(a.layers[0].attn_norm_gamma.data().iter().all(|&x| x == 1.0));
        assert!(a.layers[1].ffn_input_bias.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn partial_modes_copy_the_right_groups() {
        let base = init_params(&cfg(12), 1, InitMode::ScratchAll, None).unwrap();
        let embed = init_params(&cfg(12), 2, InitMode::ScratchEmbed, Some(&base)).unwrap();
        assert_eq!(embed.layers, base.layers);
        assert_ne!(embed.token_embedding, base.token_embedding);
        assert_ne!(embed.position_embedding, base.position_embedding);
        let layer = init_params(&cfg(12), 2, InitMode::ScratchLayer, Some(&base)).unwrap();
        assert_eq!(layer.token_embedding, base.token_embedding);
        assert_ne!(layer.layers[0].query_weight, base.layers[0].query_weight);
        let full = init_params(&cfg(12), 2, InitMode::FromCheckpoint, Some(&base)).unwrap();
        assert_eq!(full, base);
    }

    #[test]
    fn vocab_change_trims_or_extends_rows() {
        let base = init_params(&cfg(12), 1, InitMode::ScratchAll, None).unwrap();
        let small = init_params(&cfg(10), 1, InitMode::FromCheckpoint, Some(&base)).unwrap();
        assert_eq!(small.token_embedding.data(), &base.token_embedding.data()[..80]);
        let big = init_params(&cfg(15), 1, InitMode::FromCheckpoint, Some(&base)).unwrap();
        assert_eq!(&big.token_embedding.data()[..96], base.token_embedding.data());
        assert_eq!(big.token_embedding.shape(), &[15, 8]);
    }

    #[test]
    fn mismatches_name_the_tensor() {
        let base = init_params(&cfg(12), 1, InitMode::ScratchAll, None).unwrap();
        let wider = ModelConfig::new(2, 12, 2, 6, 12);
        let err = init_params(&wider, 1, InitMode::FromCheckpoint, Some(&base)).unwrap_err();
        assert_eq!(err.kind(), "load");
        assert!(err.to_string().contains("embeddings.token"));
        let deeper = ModelConfig::new(3, 8, 2, 6, 12);
        let err = init_params(&deeper, 1, InitMode::ScratchEmbed, Some(&base)).unwrap_err();
        assert_eq!(err.kind(), "load");
        let err = init_params(&cfg(12), 1, InitMode::ScratchLayer, None).unwrap_err();
        assert_eq!(err.kind(), "parameter");
        assert_eq!("scratch_embed".parse::<InitMode>().unwrap(), InitMode::ScratchEmbed);
    }
}
