//! Synthetic interaction data for experiments and smoke tests.

use rand::Rng;

use crate::corpus::{Interaction, UserSequence};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};

/// First-order Markov chain over items. Every item has a few preferred
/// successors that carry most of the transition mass; the rest is spread
/// uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSpec {
    pub users: usize,
    pub items: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Preferred successors per item.
    pub branching: usize,
    /// Probability of a uniform jump instead of a preferred successor.
    pub noise: f64,
    pub seed: u64,
}

impl Default for MarkovSpec {
    fn default() -> Self {
        MarkovSpec {
            users: 5000,
            items: 200,
            min_len: 8,
            max_len: 20,
            branching: 3,
            noise: 0.1,
            seed: 0,
        }
    }
}

pub fn item_name(i: usize) -> String {
    format!("i{i}")
}

pub fn user_name(u: usize) -> String {
    format!("u{u}")
}

/// Samples user sequences from the chain described by `spec`.
pub fn markov_sequences(spec: &MarkovSpec) -> Result<Vec<UserSequence>> {
    if spec.items < 2 || spec.branching == 0 || spec.branching > spec.items {
        return Err(Error::param("markov chain needs items >= 2 and 1 <= branching <= items"));
    }
    if spec.min_len < 3 || spec.min_len > spec.max_len {
        return Err(Error::param("markov lengths need 3 <= min_len <= max_len"));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::param(format!("noise {} outside [0, 1]", spec.noise)));
    }
    let mut rng = stream(spec.seed, &[domain::SYNTHETIC, 0]);
    let successors: Vec<Vec<(usize, f64)>> = (0..spec.items)
        .map(|_| {
            let picks: Vec<usize> = (0..spec.branching).map(|_| rng.random_range(0..spec.items)).collect();
            let weights: Vec<f64> = (0..spec.branching).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            picks.into_iter().zip(weights.into_iter().map(|w| w / total)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(spec.users);
    for u in 0..spec.users {
        let mut rng = stream(spec.seed, &[domain::SYNTHETIC, 1, u as u64]);
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut cur = rng.random_range(0..spec.items);
        let mut items = vec![item_name(cur)];
        while items.len() < len {
            cur = if rng.random::<f64>() < spec.noise {
                rng.random_range(0..spec.items)
            } else {
                let mut x: f64 = rng.random();
                let succ = &successors[cur];
                succ.iter()
                    .find(|&&(_, w)| {
                        x -= w;
                        x < 0.0
                    })
                    .unwrap_or(&succ[succ.len() - 1])
                    .0
            };
            items.push(item_name(cur));
        }
        out.push(UserSequence {
            user: user_name(u),
            items,
        });
    }
    Ok(out)
}

/// Fully determined sequences: user `u` walks `start_u, start_u + 1, ...`
/// modulo `items`, with a random start. Useful for overfitting checks.
pub fn pattern_sequences(users: usize, len: usize, items: usize, seed: u64) -> Vec<UserSequence> {
    let mut rng = stream(seed, &[domain::SYNTHETIC, 2]);
    (0..users)
        .map(|u| {
            let start = rng.random_range(0..items);
            UserSequence {
                user: user_name(u),
                items: (0..len).map(|t| item_name((start + t) % items)).collect(),
            }
        })
        .collect()
}

/// Flattens sequences into interactions with timestamps equal to positions.
pub fn to_interactions(sequences: &[UserSequence]) -> Vec<Interaction> {
    sequences
        .iter()
        .flat_map(|s| {
            s.items
                .iter()
                .enumerate()
                .map(move |(t, item)| Interaction::new(s.user.clone(), item.clone(), t as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_sequences;

    #[test]
    fn markov_is_seeded_and_bounded() {
        let spec = MarkovSpec {
            users: 50,
            items: 20,
            ..MarkovSpec::default()
        };
        let a = markov_sequences(&spec).unwrap();
        assert_eq!(a, markov_sequences(&spec).unwrap());
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|s| (8..=20).contains(&s.items.len())));
        let b = markov_sequences(&MarkovSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn interactions_rebuild_the_sequences() {
        let seqs = pattern_sequences(4, 6, 10, 3);
        assert_eq!(build_sequences(&to_interactions(&seqs)), seqs);
    }
}
