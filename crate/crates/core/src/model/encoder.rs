use crate::corpus::PAD;
use crate::error::{Error, Result};
use crate::rng::SeqRng;
use crate::tensor::{Tape, Tensor, Var};

use super::{slot, BoundParams, ModelConfig, ModelParams, LAYER_NORM_EPS};

/// Forward-pass mode. Dropout only runs in `Train`.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut SeqRng),
}

impl Mode<'_> {
    fn dropout(&mut self, tape: &mut Tape<'_>, x: Var, rate: f64) -> Result<Var> {
        match self {
            Mode::Eval => Ok(x),
            Mode::Train(rng) => tape.dropout(x, rate, &mut **rng),
        }
    }
}

fn check_inputs(config: &ModelConfig, inputs: &[u32], batch: usize) -> Result<usize> {
    if batch == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(batch) {
        return Err(Error::shape(format!(
            "{} tokens do not split into {batch} sequences",
            inputs.len()
        )));
    }
    let n = inputs.len() / batch;
    if n > config.max_len {
        return Err(Error::shape(format!(
            "sequence length {n} exceeds max_len {}",
            config.max_len
        )));
    }
    Ok(n)
}

/// Token + position + segment embedding, `[B * n, d]`.
pub fn embed(
    tape: &mut Tape<'_>,
    bound: &BoundParams,
    config: &ModelConfig,
    inputs: &[u32],
    batch: usize,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let n = check_inputs(config, inputs, batch)?;
    let ids: Vec<usize> = inputs.iter().map(|&t| t as usize).collect();
    let positions: Vec<usize> = (0..batch).flat_map(|_| 0..n).collect();
    let tok = tape.embedding(bound.token_embedding(), &ids)?;
    let pos = tape.embedding(bound.position_embedding(), &positions)?;
    let x = tape.add(tok, pos)?;
    let x = tape.add_bias(x, bound.segment_embedding())?;
    mode.dropout(tape, x, config.dropout)
}

/// Scaled dot-product attention over `[B, H, n, d_h]` inputs. Keys flagged in
/// `key_pad` (`[B * n]`) receive no weight. Returns the mixed values and the
/// attention weights `[B, H, n, n]`.
pub fn attention(
    tape: &mut Tape<'_>,
    q: Var,
    k: Var,
    v: Var,
    key_pad: &[bool],
) -> Result<(Var, Var)> {
    let dh = tape.value(q).last_dim();
    let scores = tape.matmul_transposed(q, k)?;
    let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
    let scores = tape.mask_keys(scores, key_pad)?;
    let weights = tape.softmax_rows(scores, 1.0)?;
    let out = tape.matmul(weights, v)?;
    Ok((out, weights))
}

fn linear(tape: &mut Tape<'_>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_bias(y, b)
}

fn split_heads(tape: &mut Tape<'_>, x: Var, batch: usize, n: usize, heads: usize) -> Result<Var> {
    let d = tape.value(x).last_dim();
    let x = tape.reshape(x, &[batch, n, heads, d / heads])?;
    tape.swap_axes_12(x)
}

fn encoder_layer(
    tape: &mut Tape<'_>,
    p: &[Var],
    config: &ModelConfig,
    x: Var,
    shape: (usize, usize),
    key_pad: &[bool],
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let (batch, n) = shape;
    let heads = config.num_heads;
    let q = linear(tape, x, p[slot::QUERY_W], p[slot::QUERY_B])?;
    let k = linear(tape, x, p[slot::KEY_W], p[slot::KEY_B])?;
    let v = linear(tape, x, p[slot::VALUE_W], p[slot::VALUE_B])?;
    let q = split_heads(tape, q, batch, n, heads)?;
    let k = split_heads(tape, k, batch, n, heads)?;
    let v = split_heads(tape, v, batch, n, heads)?;
    let (mixed, _) = attention(tape, q, k, v, key_pad)?;
    let mixed = tape.swap_axes_12(mixed)?;
    let mixed = tape.reshape(mixed, &[batch * n, config.hidden_dim])?;
    let attn = linear(tape, mixed, p[slot::ATTN_OUT_W], p[slot::ATTN_OUT_B])?;
    let attn = mode.dropout(tape, attn, config.dropout)?;
    let h = tape.add(x, attn)?;
    let h = tape.layer_norm(h, p[slot::ATTN_NORM_G], p[slot::ATTN_NORM_B], LAYER_NORM_EPS)?;

    let f = linear(tape, h, p[slot::FFN_IN_W], p[slot::FFN_IN_B])?;
    let f = tape.gelu(f);
    let f = linear(tape, f, p[slot::FFN_OUT_W], p[slot::FFN_OUT_B])?;
    let f = mode.dropout(tape, f, config.dropout)?;
    let out = tape.add(h, f)?;
    tape.layer_norm(out, p[slot::FFN_NORM_G], p[slot::FFN_NORM_B], LAYER_NORM_EPS)
}

/// Final hidden states `[B * n, d]`.
pub fn encode(
    tape: &mut Tape<'_>,
    bound: &BoundParams,
    config: &ModelConfig,
    inputs: &[u32],
    batch: usize,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let n = check_inputs(config, inputs, batch)?;
    let key_pad: Vec<bool> = inputs.iter().map(|&t| t == PAD).collect();
    let mut x = embed(tape, bound, config, inputs, batch, mode)?;
    for l in 0..bound.num_layers() {
        x = encoder_layer(tape, bound.layer(l), config, x, (batch, n), &key_pad, mode)?;
    }
    Ok(x)
}

/// Item scores for hidden rows `[R, d]`, giving `[R, V]`.
pub fn output_logits(tape: &mut Tape<'_>, bound: &BoundParams, hidden: Var) -> Result<Var> {
    let table = bound.output_weight().unwrap_or(bound.token_embedding());
    let logits = tape.matmul_transposed(hidden, table)?;
    tape.add_bias(logits, bound.output_bias())
}

/// Logits at every position, `[B, n, V]`.
pub fn forward(
    tape: &mut Tape<'_>,
    bound: &BoundParams,
    config: &ModelConfig,
    inputs: &[u32],
    batch: usize,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let hidden = encode(tape, bound, config, inputs, batch, mode)?;
    let logits = output_logits(tape, bound, hidden)?;
    let n = inputs.len() / batch;
    tape.reshape(logits, &[batch, n, config.vocab_size])
}

/// Eval-mode logits `[rows.len(), V]` at the given flat positions.
pub fn predict_rows(
    params: &ModelParams,
    config: &ModelConfig,
    inputs: &[u32],
    batch: usize,
    rows: &[usize],
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let hidden = encode(&mut tape, &bound, config, inputs, batch, &mut Mode::Eval)?;
    let picked = tape.select_rows(hidden, rows)?;
    let logits = output_logits(&mut tape, &bound, picked)?;
    Ok(tape.value(logits).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, InitMode};
    use crate::rng::stream;

    fn tiny() -> ModelConfig {
        ModelConfig::new(2, 8, 2, 6, 12).with_dropout(0.0)
    }

    #[test]
    fn attention_rows_sum_to_one_and_skip_padding() {
        let mut tape = Tape::new();
        let mut rng = stream(3, &[]);
        use rand::Rng;
        let mut rand_t = |shape: [usize; 4]| {
            Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
        };
        let (q, k, v) = (rand_t([2, 2, 4, 3]), rand_t([2, 2, 4, 3]), rand_t([2, 2, 4, 3]));
        let q = tape.constant(q);
        let k = tape.constant(k);
        let v = tape.constant(v);
        let pad = [true, false, false, false, true, true, false, false];
        let (_, w) = attention(&mut tape, q, k, v, &pad).unwrap();
        let w = tape.value(w);
        for r in 0..w.rows() {
            let row = w.row(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let b = r / 8;
            for (j, &x) in row.iter().enumerate() {
                if pad[b * 4 + j] {
                    assert!(x < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_shape_and_padding_invariance() {
        let cfg = tiny();
        let params = init_params(&cfg, 1, InitMode::ScratchAll, None).unwrap();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let inputs = [0, 0, 4, 5, 6, 1, 3, 7, 8, 9, 10, 1];
        let y = forward(&mut tape, &bound, &cfg, &inputs, 2, &mut Mode::Eval).unwrap();
        assert_eq!(tape.value(y).shape(), &[2, 6, 12]);
        // Changing a padded key's embedding row must not move real outputs.
        let mut other = params.clone();
        for x in other.token_embedding.data_mut()[..8].iter_mut() {
            *x += 0.5;
        }
        let a = predict_rows(&params, &cfg, &inputs[..6], 1, &[5]).unwrap();
        let b = predict_rows(&other, &cfg, &inputs[..6], 1, &[5]).unwrap();
        for (x, y) in a.data().iter().zip(b.data()).skip(1) {
            // Column 0 is the PAD logit itself, which does depend on the row.
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_overlong_sequences() {
        let cfg = tiny();
        let params = init_params(&cfg, 1, InitMode::ScratchAll, None).unwrap();
        let err = predict_rows(&params, &cfg, &[2; 7], 1, &[0]).unwrap_err();
        assert_eq!(err.kind(), "shape");
    }
}
