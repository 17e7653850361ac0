//! Full-ranking evaluation of an untrained and a briefly trained model on
//! the validation and test splits.

use seqrec::corpus::{item_set, make_token_map, split_leave_one_out};
use seqrec::evaluate::{evaluate, ModelScorer, Split};
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::train::{train, TrainConfig};

fn main() -> seqrec::Result<()> {
    let seqs = markov_sequences(&MarkovSpec { users: 1000, ..MarkovSpec::default() })?;
    let map = make_token_map(&item_set(&seqs), 0)?;
    let ds = split_leave_one_out(&seqs, 18, &map)?.dataset;
    let config = ModelConfig::new(1, 32, 2, ds.max_len, ds.vocab_size);
    let init = init_params(&config, 0, InitMode::ScratchAll, None)?;
    let tc = TrainConfig { learning_rate: 3e-3, max_epochs: 3, ..TrainConfig::default() };
    let (trained, _) = train(init.clone(), &config, &ds, &tc, None)?;

    for (label, params) in [("untrained", &init), ("trained", &trained)] {
        for split in [Split::Val, Split::Test] {
            let report = evaluate(&ModelScorer { params, config: &config }, &ds, split, &[1, 5, 10])?;
            println!("{label} {}", report.without_ranks().to_json()?);
        }
    }
    Ok(())
}
