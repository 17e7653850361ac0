use std::fmt;
use std::str::FromStr;

use crate::corpus::FIRST_ITEM_TOKEN;
use crate::error::{Error, Result};

/// 1-based rank of `target` among real-item tokens (`2..V`) under descending
/// score. Ties go to the lower token ID.
pub fn rank_of_target(scores: &[f64], target: u32) -> Result<usize> {
    let t = target as usize;
    if target < FIRST_ITEM_TOKEN || t >= scores.len() {
        return Err(Error::contract(format!(
            "target token {target} is not a ranking candidate (vocabulary {})",
            scores.len()
        )));
    }
    let s = scores[t];
    let first = FIRST_ITEM_TOKEN as usize;
    let ahead = scores[first..]
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x > s || (x == s && j + first < t))
        .count();
    Ok(ahead + 1)
}

/// Real-item tokens ordered by the same rule as [`rank_of_target`].
pub fn ranked_items(scores: &[f64]) -> Vec<u32> {
    let mut items: Vec<u32> = (FIRST_ITEM_TOKEN..scores.len() as u32).collect();
    items.sort_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    items
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("K must be at least 1"));
    }
    Ok(())
}

pub fn hr_at_k(rank: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(if rank <= k { 1.0 } else { 0.0 })
}

pub fn ndcg_at_k(rank: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Hr,
    Ndcg,
}

/// A metric at a cutoff, written `HR@10` or `NDCG@10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Metric {
    pub kind: MetricKind,
    pub k: usize,
}

impl Metric {
    pub const fn hr(k: usize) -> Self {
        Metric {
            kind: MetricKind::Hr,
            k,
        }
    }

    pub const fn ndcg(k: usize) -> Self {
        Metric {
            kind: MetricKind::Ndcg,
            k,
        }
    }

    pub fn at_rank(self, rank: usize) -> Result<f64> {
        match self.kind {
            MetricKind::Hr => hr_at_k(rank, self.k),
            MetricKind::Ndcg => ndcg_at_k(rank, self.k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::Hr => "HR",
            MetricKind::Ndcg => "NDCG",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("unknown metric {s:?}; expected HR@K or NDCG@K"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        check_k(k)?;
        match name.to_ascii_uppercase().as_str() {
            "HR" => Ok(Metric::hr(k)),
            "NDCG" => Ok(Metric::ndcg(k)),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        assert_eq!(hr_at_k(1, 10).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(1, 10).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(3, 10).unwrap(), 0.5);
        assert_eq!(hr_at_k(6, 5).unwrap(), 0.0);
        assert_eq!(ndcg_at_k(6, 5).unwrap(), 0.0);
        assert_eq!(hr_at_k(1, 0).unwrap_err().kind(), "parameter");
    }

    #[test]
    fn ties_favour_low_tokens() {
        let scores = [9.0, 9.0, 0.5, 0.5, 0.5];
        assert_eq!(rank_of_target(&scores, 2).unwrap(), 1);
        assert_eq!(rank_of_target(&scores, 4).unwrap(), 3);
        assert_eq!(ranked_items(&scores), vec![2, 3, 4]);
        assert_eq!(rank_of_target(&scores, 1).unwrap_err().kind(), "contract");
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [Metric::hr(5), Metric::ndcg(10)] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("MRR@3".parse::<Metric>().is_err());
    }
}
