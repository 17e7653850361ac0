use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FIRST_ITEM_TOKEN;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Seeded random bijection between item ids and tokens `2..vocab_size`.
/// Tokens 0 and 1 are PAD and MASK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenMap {
    seed: u64,
    by_token: Vec<String>,
    by_item: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct TokenMapFile {
    seed: u64,
    pad: u32,
    mask: u32,
    /// Item id for each token, starting at token 2.
    items: Vec<String>,
}

/// Builds the map for `items` under `seed`. The result depends only on the
/// seed and the set of items, not on their order or multiplicity.
pub fn make_token_map<S: AsRef<str>>(items: &[S], seed: u64) -> Result<TokenMap> {
    let mut sorted: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(Error::param("token map needs at least one item"));
    }
    let mut tokens: Vec<u32> = (0..sorted.len() as u32).map(|i| i + FIRST_ITEM_TOKEN).collect();
    tokens.shuffle(&mut rng::stream(seed, &[domain::TOKEN_MAP]));
    let mut by_token = vec![String::new(); sorted.len()];
    let mut by_item = HashMap::with_capacity(sorted.len());
    for (item, &token) in sorted.iter().zip(&tokens) {
        by_token[(token - FIRST_ITEM_TOKEN) as usize] = item.to_string();
        by_item.insert(item.to_string(), token);
    }
    Ok(TokenMap {
        seed,
        by_token,
        by_item,
    })
}

impl TokenMap {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn item_count(&self) -> usize {
        self.by_token.len()
    }

    /// Item count plus the two reserved tokens.
    pub fn vocab_size(&self) -> usize {
        self.by_token.len() + FIRST_ITEM_TOKEN as usize
    }

    pub fn token(&self, item: &str) -> Option<u32> {
        self.by_item.get(item).copied()
    }

    pub fn item(&self, token: u32) -> Option<&str> {
        token
            .checked_sub(FIRST_ITEM_TOKEN)
            .and_then(|i| self.by_token.get(i as usize))
            .map(String::as_str)
    }

    /// Items in token order (token 2 first).
    pub fn items_by_token(&self) -> &[String] {
        &self.by_token
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TokenMapFile {
            seed: self.seed,
            pad: super::PAD,
            mask: super::MASK,
            items: self.by_token.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TokenMapFile = serde_json::from_str(text)?;
        if file.pad != super::PAD || file.mask != super::MASK {
            return Err(Error::load("token map uses unexpected reserved tokens"));
        }
        let mut by_item = HashMap::with_capacity(file.items.len());
        for (i, item) in file.items.iter().enumerate() {
            if by_item.insert(item.clone(), i as u32 + FIRST_ITEM_TOKEN).is_some() {
                return Err(Error::load(format!("item {item:?} appears twice in token map")));
            }
        }
        Ok(TokenMap {
            seed: file.seed,
            by_token: file.items,
            by_item,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("item{i}")).collect()
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(make_token_map(&items(20), 3).unwrap(), make_token_map(&items(20), 3).unwrap());
    }

    #[test]
    fn independent_of_input_order() {
        let mut rev = items(20);
        rev.reverse();
        rev.push("item3".into());
        assert_eq!(make_token_map(&items(20), 3).unwrap(), make_token_map(&rev, 3).unwrap());
    }

    #[test]
    fn different_seeds_are_both_bijections() {
        let a = make_token_map(&items(30), 1).unwrap();
        let b = make_token_map(&items(30), 2).unwrap();
        assert_ne!(a.items_by_token(), b.items_by_token());
        for map in [&a, &b] {
            let mut seen = vec![false; map.vocab_size()];
            for it in items(30) {
                let t = map.token(&it).unwrap();
                assert!(t >= FIRST_ITEM_TOKEN);
                assert!(!seen[t as usize]);
                seen[t as usize] = true;
                assert_eq!(map.item(t), Some(it.as_str()));
            }
            assert!(seen[2..].iter().all(|&s| s));
        }
    }

    #[test]
    fn reserved_tokens_map_to_nothing() {
        let m = make_token_map(&items(3), 0).unwrap();
        assert_eq!(m.item(0), None);
        assert_eq!(m.item(1), None);
        assert_eq!(m.item(5), None);
    }

    #[test]
    fn json_round_trip() {
        let m = make_token_map(&items(10), 9).unwrap();
        assert_eq!(TokenMap::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn empty_item_set_rejected() {
        assert!(make_token_map::<String>(&[], 0).is_err());
    }
}
