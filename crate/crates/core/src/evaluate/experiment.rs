use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{item_set, make_token_map, split_leave_one_out, SplitDataset, UserSequence};
use crate::distill::{distill, DistillConfig};
use crate::error::{Error, Result};
use crate::model::{init_params, InitMode, ModelConfig, ModelParams};
use crate::train::{train, History, TrainConfig};

use super::{evaluate, ModelScorer, RankingReport, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Rho,
    Alpha,
    Temperature,
    MappingSeed,
    InitMode,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Rho => "rho",
            Axis::Alpha => "alpha",
            Axis::Temperature => "temperature",
            Axis::MappingSeed => "mapping_seed",
            Axis::InitMode => "init_mode",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::Rho, Axis::Alpha, Axis::Temperature, Axis::MappingSeed, Axis::InitMode]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::param(format!("unknown sweep axis {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Mode(InitMode),
}

impl SweepValue {
    /// Parses a value for `axis` from its command-line form.
    pub fn parse(axis: Axis, s: &str) -> Result<Self> {
        match axis {
            Axis::InitMode => s.parse().map(SweepValue::Mode),
            _ => s
                .parse()
                .map(SweepValue::Number)
                .map_err(|_| Error::param(format!("{axis} value {s:?} is not a number"))),
        }
    }
}

impl From<f64> for SweepValue {
    fn from(x: f64) -> Self {
        SweepValue::Number(x)
    }
}

impl From<InitMode> for SweepValue {
    fn from(m: InitMode) -> Self {
        SweepValue::Mode(m)
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Mode(m) => write!(f, "{m}"),
        }
    }
}

/// What a single run does after initialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    Train,
    Distill { alpha: f64, temperature: f64 },
}

/// Reports per cell plus per-metric mean and population std across cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub axis: Axis,
    pub values: Vec<String>,
    pub cells: Vec<RankingReport>,
    pub mean: BTreeMap<String, f64>,
    pub std: BTreeMap<String, f64>,
}

impl ExperimentGrid {
    pub fn from_cells(axis: Axis, values: Vec<String>, cells: Vec<RankingReport>) -> Self {
        let mut mean = BTreeMap::new();
        let mut std = BTreeMap::new();
        if let Some(first) = cells.first() {
            for key in first.metrics.keys() {
                let xs: Vec<f64> = cells.iter().filter_map(|c| c.metrics.get(key).copied()).collect();
                mean.insert(key.clone(), xs.iter().sum::<f64>() / xs.len() as f64);
                std.insert(key.clone(), population_std(&xs));
            }
        }
        ExperimentGrid {
            axis,
            values,
            cells,
            mean,
            std,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Standard deviation with divisor `n`.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Everything one training or distillation run needs on a prepared dataset.
#[derive(Clone, Debug)]
pub struct RunSetup<'a> {
    pub dataset: &'a SplitDataset,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub stage: Stage,
    pub teacher: Option<(&'a ModelParams, &'a ModelConfig)>,
    pub init_mode: InitMode,
    pub init_checkpoint: Option<&'a ModelParams>,
    pub split: Split,
    pub ks: Vec<usize>,
}

impl<'a> RunSetup<'a> {
    /// Scratch training of `model` with the default Ks on the validation split.
    pub fn new(dataset: &'a SplitDataset, model: ModelConfig, train: TrainConfig) -> Self {
        RunSetup {
            dataset,
            model,
            train,
            stage: Stage::Train,
            teacher: None,
            init_mode: InitMode::ScratchAll,
            init_checkpoint: None,
            split: Split::Val,
            ks: super::DEFAULT_KS.to_vec(),
        }
    }

    fn apply(&mut self, axis: Axis, value: SweepValue) -> Result<()> {
        let mismatch = || Error::param(format!("value {value} does not fit axis {axis}"));
        match (axis, value) {
            (Axis::Rho, SweepValue::Number(x)) => self.train.rho = x,
            (Axis::Alpha, SweepValue::Number(x)) => match &mut self.stage {
                Stage::Distill { alpha, .. } => *alpha = x,
                Stage::Train => return Err(Error::param("alpha sweeps need a distill stage")),
            },
            (Axis::Temperature, SweepValue::Number(x)) => match &mut self.stage {
                Stage::Distill { temperature, .. } => *temperature = x,
                Stage::Train => return Err(Error::param("temperature sweeps need a distill stage")),
            },
            (Axis::InitMode, SweepValue::Mode(m)) => self.init_mode = m,
            (Axis::MappingSeed, _) => {
                return Err(Error::param(
                    "mapping_seed changes the dataset itself; use the stability experiment",
                ))
            }
            _ => return Err(mismatch()),
        }
        Ok(())
    }
}

/// Initializes, trains or distills, then evaluates.
pub fn run_cell(setup: &RunSetup<'_>) -> Result<(ModelParams, History, RankingReport)> {
    let init = init_params(&setup.model, setup.train.seed, setup.init_mode, setup.init_checkpoint)?;
    let (params, history) = match setup.stage {
        Stage::Train => train(init, &setup.model, setup.dataset, &setup.train, None)?,
        Stage::Distill { alpha, temperature } => {
            let (teacher, teacher_cfg) = setup
                .teacher
                .ok_or_else(|| Error::Config("distill stage needs a teacher".into()))?;
            let cfg = DistillConfig {
                alpha,
                temperature,
                train: setup.train.clone(),
            };
            distill(teacher, teacher_cfg, init, &setup.model, setup.dataset, &cfg, None)?
        }
    };
    let scorer = ModelScorer {
        params: &params,
        config: &setup.model,
    };
    let report = evaluate(&scorer, setup.dataset, setup.split, &setup.ks)?;
    Ok((params, history, report))
}

/// One run per value along `axis`, everything else fixed.
pub fn sweep(axis: Axis, values: &[SweepValue], base: &RunSetup<'_>) -> Result<ExperimentGrid> {
    if values.is_empty() {
        return Err(Error::param("sweep needs at least one value"));
    }
    let mut cells = Vec::with_capacity(values.len());
    for &v in values {
        let mut setup = base.clone();
        setup.apply(axis, v)?;
        log::info!("sweep {axis} = {v}");
        cells.push(run_cell(&setup)?.2.without_ranks());
    }
    Ok(ExperimentGrid::from_cells(
        axis,
        values.iter().map(|v| v.to_string()).collect(),
        cells,
    ))
}

/// Settings for the remap-train-evaluate pipeline. Vocabulary sizes in the
/// model configs are filled in from each mapping.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub max_len: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub stage: Stage,
    /// Trained first under each mapping when the stage is `Distill`.
    pub teacher: Option<(ModelConfig, TrainConfig)>,
    pub split: Split,
    pub ks: Vec<usize>,
}

/// Repeats the whole pipeline under each item-to-token mapping seed.
pub fn stability_experiment(
    sequences: &[UserSequence],
    seeds: &[u64],
    cfg: &PipelineConfig,
) -> Result<ExperimentGrid> {
    if seeds.len() < 2 {
        return Err(Error::param("stability needs at least two mapping seeds"));
    }
    let items = item_set(sequences);
    let mut cells = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let map = make_token_map(&items, seed)?;
        let dataset = split_leave_one_out(sequences, cfg.max_len, &map)?.dataset;
        let fit_dims = |c: &ModelConfig| ModelConfig {
            vocab_size: dataset.vocab_size,
            max_len: cfg.max_len,
            ..c.clone()
        };
        let teacher = match (&cfg.stage, &cfg.teacher) {
            (Stage::Train, _) => None,
            (Stage::Distill { .. }, Some((tc, tt))) => {
                let tc = fit_dims(tc);
                let init = init_params(&tc, tt.seed, InitMode::ScratchAll, None)?;
                Some((train(init, &tc, &dataset, tt, None)?.0, tc))
            }
            (Stage::Distill { .. }, None) => {
                return Err(Error::Config("distill stage needs a teacher config".into()))
            }
        };
        let setup = RunSetup {
            dataset: &dataset,
            model: fit_dims(&cfg.model),
            train: cfg.train.clone(),
            stage: cfg.stage,
            teacher: teacher.as_ref().map(|(p, c)| (p, c)),
            init_mode: InitMode::ScratchAll,
            init_checkpoint: None,
            split: cfg.split,
            ks: cfg.ks.clone(),
        };
        log::info!("stability run with mapping seed {seed}");
        cells.push(run_cell(&setup)?.2.without_ranks());
    }
    Ok(ExperimentGrid::from_cells(
        Axis::MappingSeed,
        seeds.iter().map(|s| s.to_string()).collect(),
        cells,
    ))
}
