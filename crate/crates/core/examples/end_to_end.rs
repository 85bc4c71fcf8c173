// The batch pipeline on a generated corpus: write exports, ingest them,
// fingerprint and cluster, then compare with the planted ground truth.
//
//     cargo run --release --example end_to_end [messages]

use telemonitor::fixture::{self, FixtureOptions};
use telemonitor::ingest::Pseudonymizer;
use telemonitor::pipeline;

pub fn run(messages: usize) -> telemonitor::Result<bool> {
    let dir = tempfile::tempdir().map_err(|e| telemonitor::Error::Config(e.to_string()))?;
    let input = dir.path().join("input");
    let dataset = dir.path().join("dataset");

    let manifest = fixture::generate(&input, &FixtureOptions::new(7, messages))?;
    let ingest = pipeline::ingest_dir(&input, &dataset, &Pseudonymizer::new(b"example secret")?)?;
    println!(
        "ingest: {} lines, {} parsed, {} invalid, {} duplicates, {} blobs",
        ingest.lines, ingest.parsed, ingest.invalid, ingest.duplicates, ingest.blobs_stored
    );
    let process = pipeline::process_dataset(&dataset, &Default::default())?;
    for (kind, found) in &process.clusters_by_kind {
        let planted = manifest.expected_clusters.get(kind).copied().unwrap_or(0);
        println!("{kind:<9} clusters found {found:>5}, planted {planted:>5}");
    }
    Ok(process.clusters_by_kind == manifest.expected_clusters)
}

fn main() -> telemonitor::Result<()> {
    let messages = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let matched = run(messages)?;
    println!("matches ground truth: {matched}");
    Ok(())
}
