#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use telemonitor::fixture::{self, FixtureOptions, Manifest};
use telemonitor::ingest::{MediaKind, Pseudonymizer, RawMessage};
use telemonitor::pipeline;
use telemonitor::store::BlobRef;
use tempfile::TempDir;

pub const SECRET: &[u8] = b"integration-test-secret";

pub fn pseudonymizer() -> Pseudonymizer {
    Pseudonymizer::new(SECRET).unwrap()
}

pub fn ts(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_612_137_600 + secs, 0).unwrap()
}

pub fn message(chat: &str, id: u64, sender: &str, at: DateTime<Utc>, kind: MediaKind) -> RawMessage {
    RawMessage {
        msg_id: id.to_string(),
        chat_id: chat.into(),
        sender: pseudonymizer().pseudonymize(sender),
        sent_at: at,
        media_kind: kind,
        text: None,
        media_ref: None,
    }
}

pub fn text_message(chat: &str, id: u64, sender: &str, at: DateTime<Utc>, text: &str) -> RawMessage {
    RawMessage {
        text: Some(text.into()),
        ..message(chat, id, sender, at, MediaKind::Text)
    }
}

pub fn media_message(chat: &str, id: u64, sender: &str, at: DateTime<Utc>, blob: BlobRef) -> RawMessage {
    RawMessage {
        media_ref: Some(blob.clone()),
        ..message(chat, id, sender, at, blob.media_kind)
    }
}

/// A generated fixture, ingested and processed into a dataset.
pub struct Built {
    pub dir: TempDir,
    pub manifest: Manifest,
}

impl Built {
    pub fn input(&self) -> PathBuf {
        self.dir.path().join("input")
    }

    pub fn dataset(&self) -> PathBuf {
        self.dir.path().join("dataset")
    }
}

pub fn build_fixture(seed: u64, messages: usize) -> Built {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    let manifest = fixture::generate(&input, &FixtureOptions::new(seed, messages)).unwrap();
    ingest_and_process(&input, &dir.path().join("dataset"));
    Built { dir, manifest }
}

pub fn ingest_and_process(input: &Path, dataset: &Path) {
    pipeline::ingest_dir(input, dataset, &pseudonymizer()).unwrap();
    pipeline::process_dataset(dataset, &Default::default()).unwrap();
}

/// Every file under `dir`, recursively, sorted by path.
pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    out.sort();
    out
}
