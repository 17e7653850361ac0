//! The bidirectional transformer encoder used for both teacher and student.

mod checkpoint;
mod encoder;
mod init;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use encoder::{attention, embed, encode, forward, output_logits, predict_rows, Mode};
pub use init::{init_params, InitMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Gradients, Tape, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Shape hyperparameters. The same type describes teacher and student.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
    /// Score items with the token embedding (transposed) instead of a
    /// separate output matrix.
    pub tie_output: bool,
}

impl ModelConfig {
    /// Config with `ffn_dim = 4 * hidden_dim`, dropout 0.1 and a tied head.
    pub fn new(
        num_layers: usize,
        hidden_dim: usize,
        num_heads: usize,
        max_len: usize,
        vocab_size: usize,
    ) -> Self {
        ModelConfig {
            num_layers,
            hidden_dim,
            num_heads,
            ffn_dim: 4 * hidden_dim,
            max_len,
            vocab_size,
            dropout: 0.1,
            tie_output: true,
        }
    }

    /// BERT-base shape: 12 layers, 768 hidden, 12 heads.
    pub fn teacher(vocab_size: usize, max_len: usize) -> Self {
        Self::new(12, 768, 12, max_len, vocab_size)
    }

    /// Two layers, 256 hidden, 4 heads.
    pub fn student(vocab_size: usize, max_len: usize) -> Self {
        Self::new(2, 256, 4, max_len, vocab_size)
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_heads == 0 || self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.num_heads) {
            return bad(format!(
                "hidden_dim {} must be a positive multiple of num_heads {}",
                self.hidden_dim, self.num_heads
            ));
        }
        if self.max_len == 0 || self.ffn_dim == 0 {
            return bad("max_len and ffn_dim must be positive".into());
        }
        if self.vocab_size < 3 {
            return bad(format!("vocab_size {} leaves no real items", self.vocab_size));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Expected `(name, shape)` of every tensor, in storage order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f, v) = (self.hidden_dim, self.ffn_dim, self.vocab_size);
        let mut out = vec![
            ("embeddings.token".to_string(), vec![v, d]),
            ("embeddings.position".to_string(), vec![self.max_len, d]),
            ("embeddings.segment".to_string(), vec![d]),
        ];
        for l in 0..self.num_layers {
            for (name, shape) in LAYER_TENSORS.iter().zip(layer_shapes(d, f)) {
                out.push((format!("layers.{l}.{name}"), shape));
            }
        }
        out.push(("head.bias".to_string(), vec![v]));
        if !self.tie_output {
            out.push(("head.weight".to_string(), vec![v, d]));
        }
        out
    }
}

const LAYER_TENSORS: [&str; 16] = [
    "attention.query.weight",
    "attention.query.bias",
    "attention.key.weight",
    "attention.key.bias",
    "attention.value.weight",
    "attention.value.bias",
    "attention.output.weight",
    "attention.output.bias",
    "attention.norm.gamma",
    "attention.norm.beta",
    "ffn.input.weight",
    "ffn.input.bias",
    "ffn.output.weight",
    "ffn.output.bias",
    "ffn.norm.gamma",
    "ffn.norm.beta",
];

fn layer_shapes(d: usize, f: usize) -> [Vec<usize>; 16] {
    [
        vec![d, d],
        vec![d],
        vec![d, d],
        vec![d],
        vec![d, d],
        vec![d],
        vec![d, d],
        vec![d],
        vec![d],
        vec![d],
        vec![d, f],
        vec![f],
        vec![f, d],
        vec![d],
        vec![d],
        vec![d],
    ]
}

/// Per-layer tensors. Projection weights are stored `[in, out]`; the query,
/// key and value weights hold all heads side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub query_weight: Tensor,
    pub query_bias: Tensor,
    pub key_weight: Tensor,
    pub key_bias: Tensor,
    pub value_weight: Tensor,
    pub value_bias: Tensor,
    pub attn_output_weight: Tensor,
    pub attn_output_bias: Tensor,
    pub attn_norm_gamma: Tensor,
    pub attn_norm_beta: Tensor,
    pub ffn_input_weight: Tensor,
    pub ffn_input_bias: Tensor,
    pub ffn_output_weight: Tensor,
    pub ffn_output_bias: Tensor,
    pub ffn_norm_gamma: Tensor,
    pub ffn_norm_beta: Tensor,
}

impl LayerParams {
    fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.query_weight,
            &self.query_bias,
            &self.key_weight,
            &self.key_bias,
            &self.value_weight,
            &self.value_bias,
            &self.attn_output_weight,
            &self.attn_output_bias,
            &self.attn_norm_gamma,
            &self.attn_norm_beta,
            &self.ffn_input_weight,
            &self.ffn_input_bias,
            &self.ffn_output_weight,
            &self.ffn_output_bias,
            &self.ffn_norm_gamma,
            &self.ffn_norm_beta,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.query_weight,
            &mut self.query_bias,
            &mut self.key_weight,
            &mut self.key_bias,
            &mut self.value_weight,
            &mut self.value_bias,
            &mut self.attn_output_weight,
            &mut self.attn_output_bias,
            &mut self.attn_norm_gamma,
            &mut self.attn_norm_beta,
            &mut self.ffn_input_weight,
            &mut self.ffn_input_bias,
            &mut self.ffn_output_weight,
            &mut self.ffn_output_bias,
            &mut self.ffn_norm_gamma,
            &mut self.ffn_norm_beta,
        ]
    }

    fn from_iter(it: &mut impl Iterator<Item = Tensor>) -> Option<Self> {
        Some(LayerParams {
            query_weight: it.next()?,
            query_bias: it.next()?,
            key_weight: it.next()?,
            key_bias: it.next()?,
            value_weight: it.next()?,
            value_bias: it.next()?,
            attn_output_weight: it.next()?,
            attn_output_bias: it.next()?,
            attn_norm_gamma: it.next()?,
            attn_norm_beta: it.next()?,
            ffn_input_weight: it.next()?,
            ffn_input_bias: it.next()?,
            ffn_output_weight: it.next()?,
            ffn_output_bias: it.next()?,
            ffn_norm_gamma: it.next()?,
            ffn_norm_beta: it.next()?,
        })
    }
}

/// All learnable tensors of one encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub token_embedding: Tensor,
    pub position_embedding: Tensor,
    /// Single segment vector added at every position.
    pub segment_embedding: Tensor,
    pub layers: Vec<LayerParams>,
    pub output_bias: Tensor,
    /// Present only when the head is not tied to the token embedding.
    pub output_weight: Option<Tensor>,
}

impl ModelParams {
    /// Tensors in storage order (matches [`ModelConfig::tensor_shapes`]).
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![
            &self.token_embedding,
            &self.position_embedding,
            &self.segment_embedding,
        ];
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.push(&self.output_bias);
        out.extend(self.output_weight.as_ref());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![
            &mut self.token_embedding,
            &mut self.position_embedding,
            &mut self.segment_embedding,
        ];
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.push(&mut self.output_bias);
        out.extend(self.output_weight.as_mut());
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = vec![
            "embeddings.token".to_string(),
            "embeddings.position".to_string(),
            "embeddings.segment".to_string(),
        ];
        for l in 0..self.layers.len() {
            out.extend(LAYER_TENSORS.iter().map(|n| format!("layers.{l}.{n}")));
        }
        out.push("head.bias".to_string());
        if self.output_weight.is_some() {
            out.push("head.weight".to_string());
        }
        out
    }

    /// Rebuilds params from tensors in storage order for `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let expected = config.tensor_shapes();
        if tensors.len() != expected.len() {
            return Err(Error::load(format!(
                "expected {} tensors, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(Error::load(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let token_embedding = it.next().unwrap();
        let position_embedding = it.next().unwrap();
        let segment_embedding = it.next().unwrap();
        let layers = (0..config.num_layers)
            .map(|_| LayerParams::from_iter(&mut it).unwrap())
            .collect();
        let output_bias = it.next().unwrap();
        let output_weight = it.next();
        Ok(ModelParams {
            token_embedding,
            position_embedding,
            segment_embedding,
            layers,
            output_bias,
            output_weight,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.numel()).sum()
    }

    /// Registers every tensor on `tape`, keyed by storage index.
    pub fn bind<'p>(&'p self, tape: &mut Tape<'p>) -> BoundParams {
        let vars = self
            .tensors()
            .into_iter()
            .enumerate()
            .map(|(i, t)| tape.param(i, t))
            .collect();
        BoundParams {
            vars,
            num_layers: self.layers.len(),
        }
    }

    /// One gradient per tensor in storage order, zero where the loss did
    /// not depend on the tensor.
    pub fn gradients(&self, grads: &mut Gradients) -> Vec<Tensor> {
        self.tensors()
            .into_iter()
            .enumerate()
            .map(|(i, t)| grads.take(i).unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
            .collect()
    }
}

/// Tape handles for every tensor of a [`ModelParams`].
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
    num_layers: usize,
}

pub(crate) mod slot {
    pub const QUERY_W: usize = 0;
    pub const QUERY_B: usize = 1;
    pub const KEY_W: usize = 2;
    pub const KEY_B: usize = 3;
    pub const VALUE_W: usize = 4;
    pub const VALUE_B: usize = 5;
    pub const ATTN_OUT_W: usize = 6;
    pub const ATTN_OUT_B: usize = 7;
    pub const ATTN_NORM_G: usize = 8;
    pub const ATTN_NORM_B: usize = 9;
    pub const FFN_IN_W: usize = 10;
    pub const FFN_IN_B: usize = 11;
    pub const FFN_OUT_W: usize = 12;
    pub const FFN_OUT_B: usize = 13;
    pub const FFN_NORM_G: usize = 14;
    pub const FFN_NORM_B: usize = 15;
}

impl BoundParams {
    pub fn token_embedding(&self) -> Var {
        self.vars[0]
    }

    pub fn position_embedding(&self) -> Var {
        self.vars[1]
    }

    pub fn segment_embedding(&self) -> Var {
        self.vars[2]
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    /// The 16 handles of layer `l`, indexed by [`slot`] constants.
    pub(crate) fn layer(&self, l: usize) -> &[Var] {
        &self.vars[3 + 16 * l..3 + 16 * (l + 1)]
    }

    pub fn output_bias(&self) -> Var {
        self.vars[3 + 16 * self.num_layers]
    }

    pub fn output_weight(&self) -> Option<Var> {
        self.vars.get(4 + 16 * self.num_layers).copied()
    }
}
