//! Leave-one-out ranking evaluation and the experiment runners built on it.

mod experiment;
mod metrics;

pub use experiment::{
    population_std, run_cell, stability_experiment, sweep, Axis, ExperimentGrid, PipelineConfig,
    RunSetup, Stage, SweepValue,
};
pub use metrics::{hr_at_k, ndcg_at_k, rank_of_target, ranked_items, Metric, MetricKind};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SplitDataset;
use crate::error::{Error, Result};
use crate::masking::test_time_mask;
use crate::model::{predict_rows, ModelConfig, ModelParams};

pub const DEFAULT_KS: [usize; 2] = [5, 10];

/// Users scored per forward pass.
const EVAL_BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::param(format!("split must be val or test, got {s:?}"))),
        }
    }
}

/// Anything that scores the final position of a batch of queries.
pub trait Scorer {
    fn vocab_size(&self) -> usize;

    /// Scores for `batch` queries of equal length, `batch * V` values.
    fn score_last(&self, queries: &[u32], batch: usize) -> Result<Vec<f64>>;

    /// Stable description hashed into the report digest.
    fn describe(&self) -> String;
}

/// A model in eval mode.
pub struct ModelScorer<'a> {
    pub params: &'a ModelParams,
    pub config: &'a ModelConfig,
}

impl Scorer for ModelScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn score_last(&self, queries: &[u32], batch: usize) -> Result<Vec<f64>> {
        let n = queries.len() / batch;
        let rows: Vec<usize> = (0..batch).map(|b| b * n + n - 1).collect();
        Ok(predict_rows(self.params, self.config, queries, batch, &rows)?.into_data())
    }

    fn describe(&self) -> String {
        serde_json::to_string(self.config).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub split: Split,
    #[serde(rename = "Ks")]
    pub ks: Vec<usize>,
    pub metrics: BTreeMap<String, f64>,
    pub users: usize,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
}

impl RankingReport {
    /// Aggregates per-user ranks; metric means are summed in user order.
    pub fn from_ranks(split: Split, ks: &[usize], ranks: Vec<usize>, describe: &str) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::param("at least one K is required"));
        }
        let mut metrics = BTreeMap::new();
        let users = ranks.len();
        for &k in ks {
            for m in [Metric::hr(k), Metric::ndcg(k)] {
                let mut total = 0.0;
                for &r in &ranks {
                    total += m.at_rank(r)?;
                }
                let mean = if users == 0 { 0.0 } else { total / users as f64 };
                metrics.insert(m.to_string(), mean);
            }
        }
        Ok(RankingReport {
            split,
            ks: ks.to_vec(),
            metrics,
            users,
            config_digest: digest(describe),
            ranks: Some(ranks),
        })
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        self.metrics.get(&m.to_string()).copied()
    }

    pub fn without_ranks(mut self) -> Self {
        self.ranks = None;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Ranks every user's held-out item. For the test split the validation item
/// is appended to the history before the `[MASK]`.
pub fn evaluate(
    scorer: &impl Scorer,
    dataset: &SplitDataset,
    split: Split,
    ks: &[usize],
) -> Result<RankingReport> {
    if scorer.vocab_size() != dataset.vocab_size {
        return Err(Error::Config(format!(
            "model vocabulary {} does not match dataset vocabulary {}",
            scorer.vocab_size(),
            dataset.vocab_size
        )));
    }
    let n = dataset.max_len;
    let v = dataset.vocab_size;
    let mut ranks = Vec::with_capacity(dataset.users.len());
    for chunk in dataset.users.chunks(EVAL_BATCH) {
        let mut queries = Vec::with_capacity(chunk.len() * n);
        let mut targets = Vec::with_capacity(chunk.len());
        for u in chunk {
            let mut history = u.history().to_vec();
            let target = match split {
                Split::Val => u.val,
                Split::Test => {
                    history.push(u.val);
                    u.test
                }
            };
            queries.extend(test_time_mask(&history, n)?);
            targets.push(target);
        }
        let scores = scorer.score_last(&queries, chunk.len())?;
        for (row, &t) in scores.chunks_exact(v).zip(&targets) {
            ranks.push(rank_of_target(row, t)?);
        }
    }
    let describe = format!("{}|{}|{}", scorer.describe(), dataset.provenance, dataset.seed);
    RankingReport::from_ranks(split, ks, ranks, &describe)
}
