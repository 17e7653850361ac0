//! One-axis sweeps over the mask ratio and the distillation weight.

use seqrec::corpus::{item_set, make_token_map, split_leave_one_out};
use seqrec::evaluate::{sweep, Axis, RunSetup, Stage, SweepValue};
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::synthetic::{markov_sequences, MarkovSpec};
use seqrec::train::{train, TrainConfig};

fn main() -> seqrec::Result<()> {
    let seqs = markov_sequences(&MarkovSpec { users: 800, ..MarkovSpec::default() })?;
    let map = make_token_map(&item_set(&seqs), 0)?;
    let ds = split_leave_one_out(&seqs, 18, &map)?.dataset;
    let quick = TrainConfig { learning_rate: 3e-3, max_epochs: 3, ..TrainConfig::default() };

    let student = ModelConfig::new(1, 32, 2, ds.max_len, ds.vocab_size);
    let rho: Vec<SweepValue> = [0.15, 0.35, 0.55, 0.75].map(SweepValue::from).to_vec();
    let grid = sweep(Axis::Rho, &rho, &RunSetup::new(&ds, student.clone(), quick.clone()))?;
    println!("{}", grid.to_json()?);

    let teacher_cfg = ModelConfig::new(2, 64, 2, ds.max_len, ds.vocab_size);
    let init = init_params(&teacher_cfg, 0, InitMode::ScratchAll, None)?;
    let (teacher, _) = train(init, &teacher_cfg, &ds, &quick, None)?;
    let base = RunSetup {
        stage: Stage::Distill { alpha: 0.5, temperature: 1.5 },
        teacher: Some((&teacher, &teacher_cfg)),
        ..RunSetup::new(&ds, student, quick)
    };
    let alpha: Vec<SweepValue> = [0.0, 0.25, 0.5, 0.75, 1.0].map(SweepValue::from).to_vec();
    println!("{}", sweep(Axis::Alpha, &alpha, &base)?.to_json()?);
    Ok(())
}
