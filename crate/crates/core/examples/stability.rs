//! Repeats the same training under three item-to-token mappings and reports
//! the spread of the test metrics.

use seqrec::evaluate::{stability_experiment, PipelineConfig, Split, Stage};
use seqrec::model::ModelConfig;
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::train::TrainConfig;

fn main() -> seqrec::Result<()> {
    let seqs = markov_sequences(&MarkovSpec { users: 1500, ..MarkovSpec::default() })?;
    let cfg = PipelineConfig {
        max_len: 18,
        // Vocabulary and length are filled in for each mapping.
        model: ModelConfig::new(1, 32, 2, 18, 3),
        train: TrainConfig { learning_rate: 3e-3, max_epochs: 6, patience: 2, ..TrainConfig::default() },
        stage: Stage::Train,
        teacher: None,
        split: Split::Test,
        ks: vec![5, 10],
    };
    let grid = stability_experiment(&seqs, &[0, 1, 2], &cfg)?;
    println!("{}", grid.to_json()?);
    Ok(())
}
