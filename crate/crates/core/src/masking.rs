//! Cloze-style training inputs and the append-`[MASK]` query.
//!
//! Each non-PAD position is selected with probability `rho`. A selected
//! position becomes `[MASK]` 80% of the time, a uniformly drawn real item
//! 10% of the time (which may happen to be the original), and stays as is
//! for the remaining 10%. Every selected position carries its original token
//! as the label; all others carry [`IGNORE`].

use rand::Rng;

use crate::corpus::{FIRST_ITEM_TOKEN, MASK, PAD};
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Label of positions that contribute no loss.
pub const IGNORE: i64 = -1;

/// What happened to one position during masking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskAction {
    Untouched,
    Masked,
    Replaced,
    Kept,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedSequence {
    pub inputs: Vec<u32>,
    pub labels: Vec<i64>,
}

impl MaskedSequence {
    pub fn target_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != IGNORE).count()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("mask ratio must lie in (0, 1), got {rho}")))
    }
}

fn apply(
    token: u32,
    vocab_size: usize,
    rng: &mut impl Rng,
) -> (u32, MaskAction) {
    let u: f64 = rng.random();
    if u < 0.8 {
        (MASK, MaskAction::Masked)
    } else if u < 0.9 {
        let t = rng.random_range(FIRST_ITEM_TOKEN..vocab_size as u32);
        (t, MaskAction::Replaced)
    } else {
        (token, MaskAction::Kept)
    }
}

/// Masks one sequence and reports the action taken at every position.
pub fn mask_sequence_traced(
    tokens: &[u32],
    rho: f64,
    vocab_size: usize,
    rng: &mut impl Rng,
) -> Result<(MaskedSequence, Vec<MaskAction>)> {
    check_rho(rho)?;
    if vocab_size <= FIRST_ITEM_TOKEN as usize {
        return Err(Error::param("vocabulary has no real items"));
    }
    let real: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i] != PAD).collect();
    if real.is_empty() {
        return Err(Error::contract("cannot mask a sequence with no items"));
    }
    let mut inputs = tokens.to_vec();
    let mut labels = vec![IGNORE; tokens.len()];
    let mut actions = vec![MaskAction::Untouched; tokens.len()];
    for &i in &real {
        if rng.random::<f64>() < rho {
            let (t, a) = apply(tokens[i], vocab_size, rng);
            inputs[i] = t;
            labels[i] = tokens[i] as i64;
            actions[i] = a;
        }
    }
    if labels.iter().all(|&l| l == IGNORE) {
        let i = real[rng.random_range(0..real.len())];
        let (t, a) = apply(tokens[i], vocab_size, rng);
        inputs[i] = t;
        labels[i] = tokens[i] as i64;
        actions[i] = a;
    }
    Ok((MaskedSequence { inputs, labels }, actions))
}

pub fn mask_sequence(
    tokens: &[u32],
    rho: f64,
    vocab_size: usize,
    rng: &mut impl Rng,
) -> Result<MaskedSequence> {
    mask_sequence_traced(tokens, rho, vocab_size, rng).map(|(m, _)| m)
}

/// Masks every sequence with its own stream `(seed, epoch, index)`, so the
/// masks change each epoch and do not depend on processing order.
pub fn mask_epoch(
    sequences: &[&[u32]],
    rho: f64,
    vocab_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<MaskedSequence>> {
    sequences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(seed, &[domain::MASKING, epoch, i as u64]);
            mask_sequence(s, rho, vocab_size, &mut r)
        })
        .collect()
}

/// Equal-length masked sequences stacked row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedBatch {
    pub inputs: Vec<u32>,
    pub labels: Vec<i64>,
    pub batch_size: usize,
    pub seq_len: usize,
}

impl MaskedBatch {
    pub fn stack<'a>(rows: impl IntoIterator<Item = &'a MaskedSequence>) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        let mut seq_len = None;
        let mut batch_size = 0;
        for r in rows {
            if r.inputs.len() != r.labels.len() {
                return Err(Error::shape("inputs and labels differ in length"));
            }
            match seq_len {
                None => seq_len = Some(r.inputs.len()),
                Some(n) if n != r.inputs.len() => {
                    return Err(Error::shape("sequences in a batch differ in length"))
                }
                _ => {}
            }
            inputs.extend_from_slice(&r.inputs);
            labels.extend_from_slice(&r.labels);
            batch_size += 1;
        }
        let seq_len = seq_len.ok_or_else(|| Error::shape("empty batch"))?;
        Ok(MaskedBatch {
            inputs,
            labels,
            batch_size,
            seq_len,
        })
    }

    /// Flat indices of positions with a label.
    pub fn target_rows(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] != IGNORE).collect()
    }

    pub fn target_labels(&self) -> Vec<i64> {
        self.labels.iter().copied().filter(|&l| l != IGNORE).collect()
    }
}

/// Query for next-item prediction: the last `n - 1` history tokens,
/// left-padded, followed by `[MASK]`.
pub fn test_time_mask(history: &[u32], n: usize) -> Result<Vec<u32>> {
    if history.is_empty() {
        return Err(Error::contract("cannot build a query from an empty history"));
    }
    if n == 0 {
        return Err(Error::param("sequence length must be at least 1"));
    }
    let keep = &history[history.len().saturating_sub(n - 1)..];
    let mut out = vec![PAD; n - 1 - keep.len()];
    out.extend_from_slice(keep);
    out.push(MASK);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_pads_and_appends_mask() {
        assert_eq!(test_time_mask(&[5, 6, 7], 5).unwrap(), vec![PAD, 5, 6, 7, MASK]);
        assert_eq!(test_time_mask(&[5], 3).unwrap(), vec![PAD, 5, MASK]);
        let hist: Vec<u32> = (2..52).collect();
        let q = test_time_mask(&hist, 50).unwrap();
        assert_eq!(q[0], 3);
        assert_eq!(q[48], 51);
        assert_eq!(q[49], MASK);
        assert!(test_time_mask(&[], 5).is_err());
    }

    #[test]
    fn masking_is_deterministic_for_seed() {
        let seq: Vec<u32> = (2..22).collect();
        let a = mask_sequence(&seq, 0.4, 30, &mut rng::stream(3, &[])).unwrap();
        let b = mask_sequence(&seq, 0.4, 30, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_only_at_selected_positions() {
        let seq = [0, 0, 4, 5, 6, 7, 8];
        for s in 0..50 {
            let (m, acts) = mask_sequence_traced(&seq, 0.5, 10, &mut rng::stream(s, &[])).unwrap();
            assert!(m.target_count() >= 1);
            for i in 0..seq.len() {
                if acts[i] == MaskAction::Untouched {
                    assert_eq!(m.labels[i], IGNORE);
                    assert_eq!(m.inputs[i], seq[i]);
                } else {
                    assert_eq!(m.labels[i], seq[i] as i64);
                    assert_ne!(seq[i], PAD);
                }
            }
        }
    }

    #[test]
    fn forces_one_target_when_none_drawn() {
        let seq = [0, 0, 9];
        for s in 0..20 {
            let m = mask_sequence(&seq, 0.01, 12, &mut rng::stream(s, &[])).unwrap();
            assert_eq!(m.labels, vec![IGNORE, IGNORE, 9]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut r = rng::stream(0, &[]);
        assert!(matches!(mask_sequence(&[0, 0], 0.5, 10, &mut r), Err(Error::Contract(_))));
        assert!(matches!(mask_sequence(&[3], 0.0, 10, &mut r), Err(Error::Parameter(_))));
        assert!(matches!(mask_sequence(&[3], 1.0, 10, &mut r), Err(Error::Parameter(_))));
    }

    #[test]
    fn batch_stacking_checks_lengths() {
        let a = MaskedSequence { inputs: vec![2, 1], labels: vec![IGNORE, 3] };
        let b = MaskedSequence { inputs: vec![2], labels: vec![IGNORE] };
        assert!(MaskedBatch::stack([&a, &b]).is_err());
        let batch = MaskedBatch::stack([&a, &a]).unwrap();
        assert_eq!(batch.target_rows(), vec![1, 3]);
        assert_eq!(batch.target_labels(), vec![3, 3]);
    }
}
