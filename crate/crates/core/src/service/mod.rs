//! Top-K recommendation from a loaded model, latency benchmarking and the
//! HTTP endpoint.

mod http;

pub use http::{router, serve, ServerConfig};

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenMap;
use crate::error::{Error, Result};
use crate::evaluate::ranked_items;
use crate::masking::test_time_mask;
use crate::model::{load_checkpoint, predict_rows, ModelConfig, ModelParams};

/// A model and its token map, read-only after construction.
#[derive(Debug)]
pub struct ServingBundle {
    params: ModelParams,
    config: ModelConfig,
    token_map: TokenMap,
}

impl ServingBundle {
    pub fn new(params: ModelParams, config: ModelConfig, token_map: TokenMap) -> Result<Self> {
        if config.vocab_size != token_map.vocab_size() {
            return Err(Error::Config(format!(
                "model vocabulary {} does not match token map vocabulary {}",
                config.vocab_size,
                token_map.vocab_size()
            )));
        }
        Ok(ServingBundle {
            params,
            config,
            token_map,
        })
    }

    pub fn load(checkpoint: impl AsRef<Path>, token_map: impl AsRef<Path>) -> Result<Self> {
        let (params, config) = load_checkpoint(checkpoint)?;
        Self::new(params, config, TokenMap::load(token_map)?)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn token_map(&self) -> &TokenMap {
        &self.token_map
    }

    /// Maps item IDs to tokens, dropping unknown ones. Returns the tokens and
    /// the number dropped.
    pub fn tokenize<S: AsRef<str>>(&self, history: &[S]) -> (Vec<u32>, usize) {
        let tokens: Vec<u32> = history
            .iter()
            .filter_map(|i| self.token_map.token(i.as_ref()))
            .collect();
        let dropped = history.len() - tokens.len();
        (tokens, dropped)
    }

    /// Scores over the full vocabulary for the next item after `tokens`.
    pub fn score_tokens(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::Request("history has no known items".into()));
        }
        let n = self.config.max_len;
        let query = test_time_mask(tokens, n)?;
        Ok(predict_rows(&self.params, &self.config, &query, 1, &[n - 1])?.into_data())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub items: Vec<String>,
    pub scores: Vec<f64>,
    pub dropped_unknown: usize,
    /// Set when `k` exceeded the number of real items.
    pub clamped: bool,
}

/// Top-`k` next items for `history`, ranked like evaluation (descending
/// score, ties to the lower token).
pub fn recommend<S: AsRef<str>>(bundle: &ServingBundle, history: &[S], k: usize) -> Result<Recommendation> {
    if k == 0 {
        return Err(Error::Request("k must be at least 1".into()));
    }
    let (tokens, dropped_unknown) = bundle.tokenize(history);
    let scores = bundle.score_tokens(&tokens)?;
    let available = bundle.token_map.item_count();
    let take = k.min(available);
    let top = &ranked_items(&scores)[..take];
    Ok(Recommendation {
        items: top
            .iter()
            .map(|&t| bundle.token_map.item(t).expect("real-item token").to_string())
            .collect(),
        scores: top.iter().map(|&t| scores[t as usize]).collect(),
        dropped_unknown,
        clamped: k > available,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub label: String,
    pub requests: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
}

impl LatencyReport {
    fn from_samples(label: &str, mut micros: Vec<f64>) -> Self {
        micros.sort_by(f64::total_cmp);
        LatencyReport {
            label: label.to_string(),
            requests: micros.len(),
            p50_us: nearest_rank(&micros, 50.0),
            p95_us: nearest_rank(&micros, 95.0),
            p99_us: nearest_rank(&micros, 99.0),
        }
    }
}

/// Nearest-rank percentile of sorted, nonempty samples.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub teacher: LatencyReport,
    pub student: LatencyReport,
    /// Student p50 over teacher p50.
    pub ratio: f64,
}

fn time_trace(bundle: &ServingBundle, label: &str, trace: &[Vec<u32>], warmup: usize, k: usize) -> Result<LatencyReport> {
    for tokens in trace.iter().cycle().take(warmup) {
        top_k(bundle, tokens, k)?;
    }
    let mut micros = Vec::with_capacity(trace.len());
    for tokens in trace {
        let start = Instant::now();
        std::hint::black_box(top_k(bundle, tokens, k)?);
        micros.push(start.elapsed().as_secs_f64() * 1e6);
    }
    Ok(LatencyReport::from_samples(label, micros))
}

fn top_k(bundle: &ServingBundle, tokens: &[u32], k: usize) -> Result<Vec<u32>> {
    let scores = bundle.score_tokens(tokens)?;
    Ok(ranked_items(&scores).into_iter().take(k).collect())
}

/// Replays the same single-request trace serially against both bundles.
/// Histories with no known items are skipped; `warmup` untimed requests run
/// first.
pub fn bench<S: AsRef<str>>(
    teacher: &ServingBundle,
    student: &ServingBundle,
    trace: &[Vec<S>],
    warmup: usize,
    k: usize,
) -> Result<BenchReport> {
    if teacher.token_map.items_by_token() != student.token_map.items_by_token() {
        return Err(Error::Config("teacher and student use different token maps".into()));
    }
    let tokens: Vec<Vec<u32>> = trace
        .iter()
        .map(|h| teacher.tokenize(h).0)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(Error::param("request trace has no usable histories"));
    }
    let teacher = time_trace(teacher, "teacher", &tokens, warmup, k)?;
    let student = time_trace(student, "student", &tokens, warmup, k)?;
    let ratio = student.p50_us / teacher.p50_us;
    Ok(BenchReport {
        teacher,
        student,
        ratio,
    })
}
