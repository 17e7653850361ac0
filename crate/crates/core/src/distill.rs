//! Teacher-student distillation with tempered soft targets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitDataset;
use crate::error::{Error, Result};
use crate::masking::MaskedBatch;
use crate::model::{encode, output_logits, predict_rows, BoundParams, Mode, ModelConfig, ModelParams};
use crate::tensor::{kernels, Tape, Tensor, Var};
use crate::train::{fit, mlm_loss, History, Objective, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Weight of the hard-label loss; `1 - alpha` goes to the soft loss.
    pub alpha: f64,
    pub temperature: f64,
    pub train: TrainConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            alpha: 0.5,
            temperature: 1.5,
            train: TrainConfig::default(),
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_temperature(self.temperature)?;
        self.train.validate().map(|_| ())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param(format!("temperature {t} must be positive")));
    }
    Ok(())
}

/// Tempered teacher distribution for each row of `teacher_logits`.
pub fn soft_targets(teacher_logits: &Tensor, temperature: f64) -> Result<Tensor> {
    check_temperature(temperature)?;
    let v = teacher_logits.last_dim();
    let mut data = teacher_logits.data().to_vec();
    for row in data.chunks_exact_mut(v) {
        let p = kernels::softmax_tempered(row, temperature);
        row.copy_from_slice(&p);
    }
    Tensor::new(teacher_logits.shape().to_vec(), data)
}

/// Cross-entropy of the tempered student against the tempered teacher,
/// averaged over rows. The teacher side is a constant.
pub fn soft_loss(tape: &mut Tape<'_>, student_logits: Var, teacher_logits: &Tensor, temperature: f64) -> Result<Var> {
    let p = soft_targets(teacher_logits, temperature)?;
    tape.soft_cross_entropy(student_logits, &p, temperature)
}

/// Masked cross-entropy against the true items at temperature 1.
pub fn hard_loss(tape: &mut Tape<'_>, student_logits: Var, labels: &[i64]) -> Result<Var> {
    mlm_loss(tape, student_logits, labels)
}

/// `alpha * hard + (1 - alpha) * T² * soft`. With `alpha = 1` the teacher
/// logits are not read and the result is the hard loss itself.
pub fn combined_loss(
    tape: &mut Tape<'_>,
    student_logits: Var,
    teacher_logits: Option<&Tensor>,
    labels: &[i64],
    alpha: f64,
    temperature: f64,
) -> Result<Var> {
    check_alpha(alpha)?;
    check_temperature(temperature)?;
    let hard = hard_loss(tape, student_logits, labels)?;
    if alpha == 1.0 {
        return Ok(hard);
    }
    let teacher = teacher_logits
        .ok_or_else(|| Error::contract("teacher logits are required when alpha < 1"))?;
    let soft = soft_loss(tape, student_logits, teacher, temperature)?;
    let hard = tape.scale(hard, alpha);
    let soft = tape.scale(soft, (1.0 - alpha) * temperature * temperature);
    tape.add(hard, soft)
}

struct Distillation<'t> {
    teacher: &'t ModelParams,
    teacher_config: &'t ModelConfig,
    alpha: f64,
    temperature: f64,
}

impl Objective for Distillation<'_> {
    fn loss(
        &self,
        tape: &mut Tape<'_>,
        bound: &BoundParams,
        config: &ModelConfig,
        batch: &MaskedBatch,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let rows = batch.target_rows();
        let teacher = if self.alpha < 1.0 {
            Some(predict_rows(self.teacher, self.teacher_config, &batch.inputs, batch.batch_size, &rows)?)
        } else {
            None
        };
        let hidden = encode(tape, bound, config, &batch.inputs, batch.batch_size, mode)?;
        let picked = tape.select_rows(hidden, &rows)?;
        let logits = output_logits(tape, bound, picked)?;
        combined_loss(tape, logits, teacher.as_ref(), &batch.target_labels(), self.alpha, self.temperature)
    }
}

/// Trains the student against the frozen teacher. Both see the same masked
/// batch; the teacher runs without dropout.
pub fn distill(
    teacher: &ModelParams,
    teacher_config: &ModelConfig,
    student_init: ModelParams,
    student_config: &ModelConfig,
    dataset: &SplitDataset,
    cfg: &DistillConfig,
    log: Option<&mut dyn Write>,
) -> Result<(ModelParams, History)> {
    cfg.validate()?;
    if teacher_config.vocab_size != student_config.vocab_size
        || teacher_config.max_len != student_config.max_len
    {
        return Err(Error::Config(format!(
            "teacher (V={}, n={}) and student (V={}, n={}) disagree",
            teacher_config.vocab_size,
            teacher_config.max_len,
            student_config.vocab_size,
            student_config.max_len
        )));
    }
    let objective = Distillation {
        teacher,
        teacher_config,
        alpha: cfg.alpha,
        temperature: cfg.temperature,
    };
    fit(student_init, student_config, dataset, &cfg.train, &objective, log)
}
