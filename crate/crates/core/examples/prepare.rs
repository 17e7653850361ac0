//! Parses an interaction log, filters rare users and items, maps items to
//! tokens and writes the leave-one-out dataset.
//!
//! `cargo run --example prepare -- ratings.dat` reads a MovieLens-style file;
//! without an argument a synthetic log is used.

use seqrec::corpus::{
    build_sequences, filter_min_count, item_set, load_interactions, make_token_map, split_leave_one_out, Format,
};
use seqrec::synthetic::{markov_sequences, to_interactions, MarkovSpec};

fn main() -> seqrec::Result<()> {
    let interactions = match std::env::args().nth(1) {
        Some(path) => load_interactions(path, Format::Ml1m)?,
        None => to_interactions(&markov_sequences(&MarkovSpec { users: 500, ..MarkovSpec::default() })?),
    };
    let kept = filter_min_count(interactions, 5)?;
    let sequences = build_sequences(&kept);
    let map = make_token_map(&item_set(&sequences), 7)?;
    let outcome = split_leave_one_out(&sequences, 50, &map)?;

    let out = std::env::temp_dir().join("seqrec-prepare");
    std::fs::create_dir_all(&out)?;
    outcome.dataset.save(out.join("dataset.srds"))?;
    map.save(out.join("tokenmap.json"))?;
    let first = &outcome.dataset.users[0];
    println!(
        "{} users ({} excluded), vocabulary {}; {} trains on {:?}, val {}, test {}",
        outcome.dataset.user_count(),
        outcome.excluded_users,
        map.vocab_size(),
        first.user,
        first.history(),
        first.val,
        first.test
    );
    println!("written to {}", out.display());
    Ok(())
}
