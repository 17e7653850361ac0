mod common;

use common::markov_dataset;
use seqrec::corpus::SplitDataset;
use seqrec::distill::{distill, DistillConfig};
use seqrec::masking::mask_epoch;
use seqrec::model::{init_params, load_checkpoint, predict_rows, InitMode, ModelConfig, ModelParams};
use seqrec::train::{train, TrainConfig};
use seqrec::Error;

fn setup() -> (SplitDataset, ModelConfig, TrainConfig) {
    let (_, ds) = markov_dataset(200, 30, 8, 0);
    let cfg = ModelConfig::new(1, 16, 2, ds.max_len, ds.vocab_size);
    let tc = TrainConfig {
        learning_rate: 3e-3,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    (ds, cfg, tc)
}

fn bits(p: &ModelParams) -> Vec<u64> {
    p.tensors().iter().flat_map(|t| t.data().iter().map(|x| x.to_bits())).collect()
}

#[test]
fn training_is_reproducible_and_logs_each_epoch() {
    let (ds, cfg, tc) = setup();
    let run = || {
        let mut log = Vec::new();
        let init = init_params(&cfg, 1, InitMode::ScratchAll, None).unwrap();
        let (p, h) = train(init, &cfg, &ds, &tc, Some(&mut log)).unwrap();
        (bits(&p), h, String::from_utf8(log).unwrap())
    };
    let (a, ha, log) = run();
    let (b, hb, _) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch,step,loss,metric");
    assert_eq!(lines.len(), 1 + ha.epochs.len());
    assert!(lines[1].starts_with("1,7,"));
}

#[test]
fn best_metric_is_the_running_maximum() {
    let (ds, cfg, mut tc) = setup();
    tc.max_epochs = 6;
    tc.patience = 2;
    let init = init_params(&cfg, 2, InitMode::ScratchAll, None).unwrap();
    let (_, h) = train(init, &cfg, &ds, &tc, None).unwrap();
    let best = h.epochs.iter().map(|e| e.metric).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(h.best_metric, best);
    assert_eq!(h.epochs[h.best_epoch - 1].metric, best);
    // Strict improvement: the earliest epoch reaching the best wins.
    assert!(h.epochs[..h.best_epoch - 1].iter().all(|e| e.metric < best));
    if h.stopped_early {
        assert_eq!(h.epochs.len(), h.best_epoch + tc.patience);
    }
}

#[test]
fn saved_checkpoint_is_the_returned_best() {
    let (ds, cfg, mut tc) = setup();
    let dir = tempfile::tempdir().unwrap();
    tc.checkpoint_path = Some(dir.path().join("best.srkd"));
    let init = init_params(&cfg, 3, InitMode::ScratchAll, None).unwrap();
    let (p, _) = train(init, &cfg, &ds, &tc, None).unwrap();
    let (saved, saved_cfg) = load_checkpoint(dir.path().join("best.srkd")).unwrap();
    assert_eq!(saved_cfg, cfg);
    assert_eq!(bits(&saved), bits(&p));
}

#[test]
fn one_epoch_of_small_steps_lowers_the_loss() {
    let (ds, cfg, mut tc) = setup();
    let cfg = cfg.with_dropout(0.0);
    tc.max_epochs = 4;
    tc.patience = 4;
    let init = init_params(&cfg, 4, InitMode::ScratchAll, None).unwrap();
    let (_, h) = train(init, &cfg, &ds, &tc, None).unwrap();
    assert!(h.epochs.last().unwrap().loss < h.epochs[0].loss);
}

#[test]
fn masks_are_redrawn_every_epoch() {
    let (ds, _, _) = setup();
    let seqs: Vec<&[u32]> = ds.users.iter().map(|u| u.train.as_slice()).collect();
    let a = mask_epoch(&seqs, 0.35, ds.vocab_size, 9, 1).unwrap();
    let b = mask_epoch(&seqs, 0.35, ds.vocab_size, 9, 2).unwrap();
    let differ = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    assert!(seqs.len() >= 100);
    assert!(differ * 10 >= seqs.len() * 9, "{differ} of {} differ", seqs.len());
    assert_eq!(a, mask_epoch(&seqs, 0.35, ds.vocab_size, 9, 1).unwrap());
}

#[test]
fn hard_only_distillation_is_plain_training() {
    let (ds, cfg, tc) = setup();
    let teacher = init_params(&cfg, 5, InitMode::ScratchAll, None).unwrap();
    let init = init_params(&cfg, 6, InitMode::ScratchAll, None).unwrap();
    let dc = DistillConfig {
        alpha: 1.0,
        temperature: 3.0,
        train: tc.clone(),
    };
    let (a, ha) = distill(&teacher, &cfg, init.clone(), &cfg, &ds, &dc, None).unwrap();
    let (b, hb) = train(init, &cfg, &ds, &tc, None).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ha, hb);
}

#[test]
fn distilling_from_itself_starts_at_the_teacher_entropy() {
    // With the student equal to the teacher, alpha = 0 and T = 1 the soft
    // loss is the entropy of the teacher's own predictions.
    let (ds, cfg, _) = setup();
    let cfg = cfg.with_dropout(0.0);
    let teacher = init_params(&cfg, 7, InitMode::ScratchAll, None).unwrap();
    let query: Vec<u32> = ds.users[0].train.clone();
    let rows: Vec<usize> = (0..query.len()).collect();
    let z = predict_rows(&teacher, &cfg, &query, 1, &rows).unwrap();
    let entropy: f64 = (0..z.rows())
        .map(|r| seqrec::tensor::kernels::entropy(&seqrec::tensor::kernels::softmax(z.row(r))))
        .sum::<f64>()
        / z.rows() as f64;
    let mut tape = seqrec::Tape::new();
    let v = tape.constant(z.clone());
    let labels = vec![2i64; z.rows()];
    let loss = seqrec::distill::combined_loss(&mut tape, v, Some(&z), &labels, 0.0, 1.0).unwrap();
    assert!((tape.value(loss).item().unwrap() - entropy).abs() < 1e-12);
}

#[test]
fn mismatched_shapes_are_config_errors() {
    let (ds, cfg, tc) = setup();
    let mut wrong = cfg.clone();
    wrong.vocab_size += 1;
    let init = init_params(&wrong, 0, InitMode::ScratchAll, None).unwrap();
    assert!(matches!(train(init, &wrong, &ds, &tc, None), Err(Error::Config(_))));
    let teacher = init_params(&wrong, 0, InitMode::ScratchAll, None).unwrap();
    let student = init_params(&cfg, 0, InitMode::ScratchAll, None).unwrap();
    let dc = DistillConfig::default();
    assert!(matches!(distill(&teacher, &wrong, student, &cfg, &ds, &dc, None), Err(Error::Config(_))));
}
