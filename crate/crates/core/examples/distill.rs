//! Trains a teacher, then compares a distilled student (alpha 0.5, T 1.5)
//! with the same student trained on hard labels alone.

use seqrec::corpus::{item_set, make_token_map, split_leave_one_out};
use seqrec::distill::{distill, DistillConfig};
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::train::{train, TrainConfig};

fn main() -> seqrec::Result<()> {
    let spec = MarkovSpec { users: 3000, min_len: 12, max_len: 12, ..MarkovSpec::default() };
    let seqs = markov_sequences(&spec)?;
    let map = make_token_map(&item_set(&seqs), 0)?;
    let ds = split_leave_one_out(&seqs, 10, &map)?.dataset;

    let teacher_cfg = ModelConfig::new(4, 128, 4, ds.max_len, ds.vocab_size);
    let tt = TrainConfig { learning_rate: 1e-3, max_epochs: 6, patience: 2, ..TrainConfig::teacher() };
    let init = init_params(&teacher_cfg, 0, InitMode::ScratchAll, None)?;
    let (teacher, th) = train(init, &teacher_cfg, &ds, &tt, None)?;
    println!("teacher NDCG@10 {:.4}", th.best_metric);

    let student_cfg = ModelConfig::new(2, 32, 2, ds.max_len, ds.vocab_size);
    for alpha in [0.5, 1.0] {
        let dc = DistillConfig {
            alpha,
            temperature: 1.5,
            train: TrainConfig { learning_rate: 2e-3, max_epochs: 10, patience: 3, ..TrainConfig::default() },
        };
        let init = init_params(&student_cfg, 0, InitMode::ScratchAll, None)?;
        let (_, h) = distill(&teacher, &teacher_cfg, init, &student_cfg, &ds, &dc, None)?;
        println!("student alpha={alpha}: NDCG@10 {:.4}", h.best_metric);
    }
    Ok(())
}
