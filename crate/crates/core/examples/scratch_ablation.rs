//! Starts a model from a pretrained checkpoint with either the embeddings or
//! the encoder layers re-drawn, and compares all four init modes.

use seqrec::corpus::{item_set, make_token_map, split_leave_one_out};
use seqrec::evaluate::{sweep, Axis, RunSetup, SweepValue};
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::train::{train, TrainConfig};

fn main() -> seqrec::Result<()> {
    let seqs = markov_sequences(&MarkovSpec { users: 1000, ..MarkovSpec::default() })?;
    let map = make_token_map(&item_set(&seqs), 0)?;
    let ds = split_leave_one_out(&seqs, 18, &map)?.dataset;
    let config = ModelConfig::new(2, 32, 2, ds.max_len, ds.vocab_size);
    let tc = TrainConfig { learning_rate: 3e-3, max_epochs: 4, ..TrainConfig::default() };

    let init = init_params(&config, 0, InitMode::ScratchAll, None)?;
    let (pretrained, _) = train(init, &config, &ds, &tc, None)?;
    let modes: Vec<SweepValue> = InitMode::ALL.iter().map(|&m| SweepValue::from(m)).collect();
    let base = RunSetup {
        init_checkpoint: Some(&pretrained),
        ..RunSetup::new(&ds, config, TrainConfig { max_epochs: 2, ..tc })
    };
    let grid = sweep(Axis::InitMode, &modes, &base)?;
    for (mode, cell) in grid.values.iter().zip(&grid.cells) {
        println!("{mode:>16}: {:?}", cell.metrics);
    }
    Ok(())
}
