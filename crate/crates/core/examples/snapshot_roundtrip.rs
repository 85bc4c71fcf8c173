// Content-addressed blobs and table snapshots: write, reload, and catch
// a tampered line.
//
//     cargo run --example snapshot_roundtrip

use telemonitor::fixture::{self, FixtureOptions};
use telemonitor::ingest::{MediaKind, Pseudonymizer};
use telemonitor::store::{self, BlobStore, MESSAGES_FILE};
use telemonitor::{pipeline, Error};

pub fn run() -> telemonitor::Result<bool> {
    let dir = tempfile::tempdir().map_err(|e| Error::Config(e.to_string()))?;
    let dataset = dir.path().join("dataset");

    let blobs = BlobStore::open(&dataset);
    let a = blobs.put_blob(b"same bytes", MediaKind::Document)?;
    let b = blobs.put_blob(b"same bytes", MediaKind::Document)?;
    println!("stored once at {} ({})", a.relative_path(), a == b);

    fixture::generate(&dir.path().join("input"), &FixtureOptions::new(9, 300))?;
    pipeline::ingest_dir(&dir.path().join("input"), &dataset, &Pseudonymizer::new(b"example secret")?)?;
    let loaded = store::load_snapshot(&dataset)?;
    let copy = dir.path().join("copy");
    store::snapshot(&loaded, &copy)?;
    let same = std::fs::read(dataset.join(MESSAGES_FILE)).ok() == std::fs::read(copy.join(MESSAGES_FILE)).ok();
    println!("{} messages reloaded, rewritten identically: {same}", loaded.messages.len());

    let path = copy.join(MESSAGES_FILE);
    let text = std::fs::read_to_string(&path).unwrap().replacen("2021-", "2020-", 1);
    std::fs::write(&path, text).unwrap();
    match store::load_snapshot(&copy) {
        Err(e @ Error::Integrity { .. }) => println!("tampering detected: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(same)
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}
