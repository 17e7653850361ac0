//! Replays a request trace against a 12-layer and a 2-layer model and prints
//! their latency percentiles.

use rand::Rng;
use seqrec::corpus::make_token_map;
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::rng::stream;
use seqrec::service::{bench, ServingBundle};
use seqrec::synthetic::item_name;

fn main() -> seqrec::Result<()> {
    let items: Vec<String> = (0..500).map(item_name).collect();
    let map = make_token_map(&items, 0)?;
    let v = map.vocab_size();
    let bundle = |cfg: ModelConfig| -> seqrec::Result<ServingBundle> {
        let params = init_params(&cfg, 0, InitMode::ScratchAll, None)?;
        ServingBundle::new(params, cfg, map.clone())
    };
    let teacher = bundle(ModelConfig::new(12, 256, 4, 50, v))?;
    let student = bundle(ModelConfig::new(2, 64, 2, 50, v))?;

    let mut rng = stream(1, &[]);
    let trace: Vec<Vec<String>> = (0..100)
        .map(|_| (0..rng.random_range(1..60)).map(|_| item_name(rng.random_range(0..500))).collect())
        .collect();
    let report = bench(&teacher, &student, &trace, 10, 10)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
