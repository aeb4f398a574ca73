//! Shows the client policy on top of a scripted transport: transient
//! failures are retried with backoff, and a second client sharing the disk
//! cache answers without touching the transport.
//!
//! cargo run --example llm_client_cache

use std::time::Duration;

use mole::llm_client::{
    CompletionClient, DiskCache, LlmClient, LlmRequest, RetryPolicy, ScriptedTransport,
    TransportError,
};

fn main() -> anyhow::Result<()> {
    let dir = tempfile_dir()?;
    let policy = RetryPolicy::new(4, Duration::from_millis(10));
    println!(
        "backoff schedule: {:?}",
        policy.delays().collect::<Vec<_>>()
    );

    let request = LlmRequest::new("gpt-4o", "Name one river.", 0.0, 32)?;
    let flaky = ScriptedTransport::new(vec![
        Err(TransportError::Transient("503".into())),
        Err(TransportError::Transient("timeout".into())),
        Ok("The Danube.".into()),
    ]);
    let cold = LlmClient::new(flaky)
        .with_retry(policy)
        .with_cache(DiskCache::open(&dir)?);
    let first = cold.complete(&request)?;
    println!(
        "cold: {:?} after {} attempts, stats {:?}",
        first.text,
        first.attempt_count,
        cold.stats()
    );

    let warm = LlmClient::new(ScriptedTransport::new(vec![])).with_cache(DiskCache::open(&dir)?);
    let second = warm.complete(&request)?;
    println!(
        "warm: {:?} cached={} created_at={} stats {:?}",
        second.text,
        second.cached,
        second.created_at,
        warm.stats()
    );
    assert_eq!(first.created_at, second.created_at);

    let exhausted = LlmClient::new(ScriptedTransport::new(vec![]))
        .with_retry(RetryPolicy::new(2, Duration::ZERO))
        .complete(&LlmRequest::new("gpt-4o", "Uncached prompt.", 0.0, 32)?);
    println!("no script left: {}", exhausted.unwrap_err());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("mole-cache-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
