//! Compares tape gradients of a small model's loss with central differences.

use rand::Rng;
use seqrec::masking::{mask_epoch, MaskedBatch};
use seqrec::model::{encode, init_params, output_logits, InitMode, Mode, ModelConfig, ModelParams};
use seqrec::rng::stream;
use seqrec::train::mlm_loss;
use seqrec::Tape;

fn loss(params: &ModelParams, cfg: &ModelConfig, batch: &MaskedBatch) -> (f64, Vec<seqrec::Tensor>) {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let hidden = encode(&mut tape, &bound, cfg, &batch.inputs, batch.batch_size, &mut Mode::Eval).unwrap();
    let picked = tape.select_rows(hidden, &batch.target_rows()).unwrap();
    let logits = output_logits(&mut tape, &bound, picked).unwrap();
    let l = mlm_loss(&mut tape, logits, &batch.target_labels()).unwrap();
    let value = tape.value(l).item().unwrap();
    let mut grads = tape.backward(l).unwrap();
    (value, params.gradients(&mut grads))
}

fn main() {
    let cfg = ModelConfig::new(1, 8, 2, 6, 15);
    let mut params = init_params(&cfg, 0, InitMode::ScratchAll, None).unwrap();
    let mut rng = stream(0, &[]);
    for t in params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
    }
    let seqs: [&[u32]; 2] = [&[0, 3, 4, 5, 6, 7], &[8, 9, 10, 11, 12, 13]];
    let batch = MaskedBatch::stack(&mask_epoch(&seqs, 0.5, 15, 0, 1).unwrap()).unwrap();

    let (_, analytic) = loss(&params, &cfg, &batch);
    let h = 1e-5;
    let names = params.names();
    for (i, g) in analytic.iter().enumerate() {
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for j in 0..g.numel() {
            let mut p = params.clone();
            p.tensors_mut()[i].data_mut()[j] += h;
            let up = loss(&p, &cfg, &batch).0;
            p.tensors_mut()[i].data_mut()[j] -= 2.0 * h;
            let down = loss(&p, &cfg, &batch).0;
            let numeric = (up - down) / (2.0 * h);
            diff += (numeric - g.data()[j]).powi(2);
            norm = norm.max(numeric.abs()).max(g.data()[j].abs());
        }
        println!("{:<32} max |g| {norm:9.2e}  |a - n| {:9.2e}", names[i], diff.sqrt());
    }
}
