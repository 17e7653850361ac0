//! Trains a small encoder with the masked-item objective and early stopping
//! on validation NDCG@10.

use seqrec::corpus::{item_set, make_token_map, split_leave_one_out};
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::train::{train, TrainConfig};

fn main() -> seqrec::Result<()> {
    let seqs = markov_sequences(&MarkovSpec { users: 2000, ..MarkovSpec::default() })?;
    let map = make_token_map(&item_set(&seqs), 0)?;
    let ds = split_leave_one_out(&seqs, 18, &map)?.dataset;

    let config = ModelConfig::new(2, 64, 2, ds.max_len, ds.vocab_size);
    let tc = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 10,
        patience: 2,
        ..TrainConfig::teacher()
    };
    let init = init_params(&config, tc.seed, InitMode::ScratchAll, None)?;
    let mut log = std::io::stdout();
    let (params, history) = train(init, &config, &ds, &tc, Some(&mut log))?;
    println!(
        "best NDCG@10 {:.4} at epoch {} ({} parameters, stopped early: {})",
        history.best_metric,
        history.best_epoch,
        params.parameter_count(),
        history.stopped_early
    );
    Ok(())
}
