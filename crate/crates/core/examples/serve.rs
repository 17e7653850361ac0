//! Serves recommendations over HTTP on $SEQREC_PORT (default 8080).
//!
//! ```text
//! curl -s localhost:8080/recommend -d '{"items": ["i3", "i17"], "k": 5}' -H 'content-type: application/json'
//! ```

use std::sync::Arc;

use seqrec::corpus::make_token_map;
use seqrec::model::{init_params, InitMode, ModelConfig};
use seqrec::service::{serve, ServerConfig, ServingBundle};
use seqrec::synthetic::item_name;

#[tokio::main]
async fn main() -> seqrec::Result<()> {
    let items: Vec<String> = (0..200).map(item_name).collect();
    let map = make_token_map(&items, 0)?;
    let config = ModelConfig::new(2, 64, 2, 20, map.vocab_size());
    let params = init_params(&config, 0, InitMode::ScratchAll, None)?;
    let bundle = Arc::new(ServingBundle::new(params, config, map)?);

    let port: u16 = std::env::var("SEQREC_PORT").ok().and_then(|p| p.parse().ok()).unwrap_or(8080);
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    println!("listening on {}", listener.local_addr()?);
    serve(listener, bundle, ServerConfig::default(), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
