//! Interaction logs to fixed-length token sequences.
//!
//! Ratings and reviews are all treated as implicit feedback: a line only
//! says that a user touched an item at some time.

mod artifact;
mod split;
mod token_map;

pub use artifact::{read_dataset, write_dataset, DatasetHeader};
pub use split::{split_leave_one_out, SplitDataset, SplitOutcome, UserSplit};
pub use token_map::{make_token_map, TokenMap};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reserved padding token.
pub const PAD: u32 = 0;
/// Reserved mask token.
pub const MASK: u32 = 1;
/// First token assigned to a real item.
pub const FIRST_ITEM_TOKEN: u32 = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: u64,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: u64) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
            timestamp,
        }
    }
}

/// Supported interaction log layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// `user::item::rating::timestamp`
    Ml1m,
    /// `user<TAB>item<TAB>timestamp`
    Tsv,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Ml1m => "ml-1m",
            Format::Tsv => "tsv",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml-1m" => Ok(Format::Ml1m),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::param(format!(
                "unknown interaction format {other:?} (expected ml-1m or tsv)"
            ))),
        }
    }
}

fn parse_line(line: &str, format: Format, line_no: usize) -> Result<Interaction> {
    let fields: Vec<&str> = match format {
        Format::Ml1m => line.split("::").collect(),
        Format::Tsv => line.split('\t').collect(),
    };
    let expected = match format {
        Format::Ml1m => 4,
        Format::Tsv => 3,
    };
    let malformed = |why: &str| Error::data(format!("line {line_no}: {why}: {line:?}"));
    if fields.len() != expected {
        return Err(malformed(&format!(
            "expected {expected} fields, found {}",
            fields.len()
        )));
    }
    let user = fields[0].trim();
    let item = fields[1].trim();
    if user.is_empty() || item.is_empty() {
        return Err(malformed("empty user or item id"));
    }
    if format == Format::Ml1m && fields[2].trim().parse::<f64>().is_err() {
        return Err(malformed("rating is not numeric"));
    }
    let timestamp = fields[expected - 1]
        .trim()
        .parse::<u64>()
        .map_err(|_| malformed("timestamp is not a non-negative integer"))?;
    Ok(Interaction::new(user, item, timestamp))
}

/// Parses every non-blank line of `reader`. Duplicates and file order are
/// preserved.
pub fn parse_interactions(reader: impl BufRead, format: Format) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, format, i + 1)?);
    }
    Ok(out)
}

pub fn load_interactions(path: impl AsRef<Path>, format: Format) -> Result<Vec<Interaction>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_interactions(std::io::BufReader::new(file), format)
}

/// Drops users and items with fewer than `min_count` interactions, repeating
/// until no more rows are removed.
pub fn filter_min_count(interactions: Vec<Interaction>, min_count: usize) -> Result<Vec<Interaction>> {
    if min_count == 0 {
        return Err(Error::param("min_count must be at least 1"));
    }
    let mut current = interactions;
    loop {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for it in &current {
            *users.entry(&it.user).or_default() += 1;
            *items.entry(&it.item).or_default() += 1;
        }
        let keep: Vec<bool> = current
            .iter()
            .map(|it| users[it.user.as_str()] >= min_count && items[it.item.as_str()] >= min_count)
            .collect();
        if keep.iter().all(|&k| k) {
            return Ok(current);
        }
        current = current
            .into_iter()
            .zip(keep)
            .filter_map(|(it, k)| k.then_some(it))
            .collect();
    }
}

/// One user's items in chronological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSequence {
    pub user: String,
    pub items: Vec<String>,
}

/// Groups by user (users ordered by id) and sorts each user's items by
/// timestamp; equal timestamps keep their input order.
pub fn build_sequences(interactions: &[Interaction]) -> Vec<UserSequence> {
    let mut by_user: BTreeMap<&str, Vec<&Interaction>> = BTreeMap::new();
    for it in interactions {
        by_user.entry(&it.user).or_default().push(it);
    }
    by_user
        .into_iter()
        .map(|(user, mut rows)| {
            rows.sort_by_key(|it| it.timestamp);
            UserSequence {
                user: user.to_string(),
                items: rows.into_iter().map(|it| it.item.clone()).collect(),
            }
        })
        .collect()
}

/// Distinct items across all sequences, sorted.
pub fn item_set(sequences: &[UserSequence]) -> Vec<String> {
    let mut items: Vec<String> = sequences
        .iter()
        .flat_map(|s| s.items.iter().cloned())
        .collect();
    items.sort();
    items.dedup();
    items
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, format: Format) -> Result<Vec<Interaction>> {
        parse_interactions(text.as_bytes(), format)
    }

    #[test]
    fn parses_ml1m_line_and_drops_rating() {
        let rows = parse("1::1193::5::978300760\n", Format::Ml1m).unwrap();
        assert_eq!(rows, vec![Interaction::new("1", "1193", 978300760)]);
    }

    #[test]
    fn parses_tsv_line() {
        let rows = parse("u1\ti9\t100\n", Format::Tsv).unwrap();
        assert_eq!(rows, vec![Interaction::new("u1", "i9", 100)]);
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(parse("", Format::Tsv).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("u1\ti1\t5\nu2\ti2\n", Format::Tsv).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("line 2")), "{err}");
        let err = parse("u1\ti1\t-5\n", Format::Tsv).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn unknown_format_is_parameter_error() {
        assert!(matches!("csv".parse::<Format>(), Err(Error::Parameter(_))));
    }

    #[test]
    fn duplicates_and_order_are_preserved() {
        let rows = parse("a\tx\t3\na\tx\t1\n", Format::Tsv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].timestamp, 3);
    }

    #[test]
    fn filter_keeps_dense_data_unchanged() {
        let mut rows = Vec::new();
        for u in 0..5 {
            for i in 0..5 {
                rows.push(Interaction::new(format!("u{u}"), format!("i{i}"), i));
            }
        }
        assert_eq!(filter_min_count(rows.clone(), 5).unwrap(), rows);
    }

    #[test]
    fn filter_removes_sparse_user() {
        let rows: Vec<_> = (0..3).map(|i| Interaction::new("u", format!("i{i}"), i)).collect();
        assert!(filter_min_count(rows, 5).unwrap().is_empty());
    }

    #[test]
    fn zero_min_count_rejected() {
        assert!(filter_min_count(Vec::new(), 0).is_err());
    }

    #[test]
    fn sequences_sorted_stably_by_time() {
        let rows = vec![
            Interaction::new("u", "c", 30),
            Interaction::new("u", "a", 10),
            Interaction::new("u", "b", 20),
            Interaction::new("v", "y", 5),
            Interaction::new("v", "x", 5),
        ];
        let seqs = build_sequences(&rows);
        assert_eq!(seqs[0].items, ["a", "b", "c"]);
        assert_eq!(seqs[1].items, ["y", "x"]);
    }
}
