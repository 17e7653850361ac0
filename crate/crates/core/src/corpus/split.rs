use super::{TokenMap, UserSequence, PAD};
use crate::error::{Error, Result};

/// One user's leave-one-out split, as tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSplit {
    pub user: String,
    /// The most recent `max_len` training items, left-padded with PAD.
    pub train: Vec<u32>,
    /// Second-to-last item.
    pub val: u32,
    /// Last item.
    pub test: u32,
}

impl UserSplit {
    /// Training items without the padding.
    pub fn history(&self) -> &[u32] {
        let start = self.train.iter().position(|&t| t != PAD).unwrap_or(self.train.len());
        &self.train[start..]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub max_len: usize,
    pub vocab_size: usize,
    /// Seed of the token map used to build the tokens.
    pub seed: u64,
    /// Where the interactions came from (format name or generator).
    pub provenance: String,
    pub users: Vec<UserSplit>,
}

impl SplitDataset {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }
}

#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub dataset: SplitDataset,
    /// Users dropped for having fewer than three items.
    pub excluded_users: usize,
}

/// Holds out the last item (test) and the one before it (validation); the
/// rest, truncated to the most recent `max_len`, is the training view.
pub fn split_leave_one_out(
    sequences: &[UserSequence],
    max_len: usize,
    token_map: &TokenMap,
) -> Result<SplitOutcome> {
    if max_len == 0 {
        return Err(Error::param("max_len must be at least 1"));
    }
    let mut users = Vec::with_capacity(sequences.len());
    let mut excluded = 0;
    for seq in sequences {
        if seq.items.len() < 3 {
            excluded += 1;
            continue;
        }
        let tokens = seq
            .items
            .iter()
            .map(|it| {
                token_map.token(it).ok_or_else(|| {
                    Error::data(format!("item {it:?} of user {:?} is not in the token map", seq.user))
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        let (prefix, held) = tokens.split_at(tokens.len() - 2);
        let recent = &prefix[prefix.len().saturating_sub(max_len)..];
        let mut train = vec![PAD; max_len - recent.len()];
        train.extend_from_slice(recent);
        users.push(UserSplit {
            user: seq.user.clone(),
            train,
            val: held[0],
            test: held[1],
        });
    }
    if excluded > 0 {
        log::warn!("excluded {excluded} users with fewer than 3 interactions");
    }
    Ok(SplitOutcome {
        dataset: SplitDataset {
            max_len,
            vocab_size: token_map.vocab_size(),
            seed: token_map.seed(),
            provenance: String::new(),
            users,
        },
        excluded_users: excluded,
    })
}
