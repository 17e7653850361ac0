//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use seqrec::corpus::{item_set, make_token_map, split_leave_one_out, SplitDataset, UserSequence};
use seqrec::model::ModelParams;
use seqrec::rng::stream;
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::{Tape, Tensor, Var};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = stream(seed, &[0xfd]);
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-8)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

/// Reduces any tensor to a scalar with a fixed random linear functional, so
/// every output element contributes its own weight to the gradient.
pub fn project(tape: &mut Tape<'_>, x: Var, seed: u64) -> Var {
    let n = tape.value(x).numel();
    let flat = tape.reshape(x, &[1, n]).unwrap();
    let w = tape.constant(random_tensor(&[n, 1], seed ^ 0x5eed));
    let y = tape.matmul(flat, w).unwrap();
    tape.sum(y)
}

/// Worst per-tensor relative error between the tape's gradients and central
/// differences of `f` with respect to every element of every input.
pub fn fd_error<F>(inputs: &[Tensor], f: F) -> f64
where
    F: for<'p> Fn(&mut Tape<'p>, &[Var]) -> Var,
{
    let eval = |ins: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().enumerate().map(|(i, t)| tape.param(i, t)).collect();
        let loss = f(&mut tape, &vars);
        tape.value(loss).item().unwrap()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().enumerate().map(|(i, t)| tape.param(i, t)).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let mut work = inputs.to_vec();
    let mut worst: f64 = 0.0;
    for (i, t) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zero(i, t.shape());
        let mut numeric = vec![0.0; t.numel()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + FD_STEP;
            let up = eval(&work);
            work[i].data_mut()[j] = orig - FD_STEP;
            let down = eval(&work);
            work[i].data_mut()[j] = orig;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(relative_error(analytic.data(), &numeric));
    }
    worst
}

/// Same check for a loss over whole model params, one error per tensor in
/// storage order. `loss` returns the value and the gradients.
pub fn model_fd_errors(params: &ModelParams, loss: impl Fn(&ModelParams) -> (f64, Vec<Tensor>)) -> Vec<f64> {
    let (_, analytic) = loss(params);
    let mut work = params.clone();
    let mut errors = Vec::new();
    for (i, g) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; g.numel()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let orig = work.tensors()[i].data()[j];
            work.tensors_mut()[i].data_mut()[j] = orig + FD_STEP;
            let up = loss(&work).0;
            work.tensors_mut()[i].data_mut()[j] = orig - FD_STEP;
            let down = loss(&work).0;
            work.tensors_mut()[i].data_mut()[j] = orig;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        errors.push(relative_error(g.data(), &numeric));
    }
    errors
}

/// Markov sequences of one fixed length, mapped with `map_seed` and split
/// with `max_len = len - 2` so training views carry no padding.
pub fn markov_dataset(users: usize, items: usize, len: usize, map_seed: u64) -> (Vec<UserSequence>, SplitDataset) {
    let spec = MarkovSpec {
        users,
        items,
        min_len: len,
        max_len: len,
        ..MarkovSpec::default()
    };
    let seqs = markov_sequences(&spec).unwrap();
    let ds = split(&seqs, len - 2, map_seed);
    (seqs, ds)
}

pub fn split(seqs: &[UserSequence], max_len: usize, map_seed: u64) -> SplitDataset {
    let map = make_token_map(&item_set(seqs), map_seed).unwrap();
    split_leave_one_out(seqs, max_len, &map).unwrap().dataset
}
