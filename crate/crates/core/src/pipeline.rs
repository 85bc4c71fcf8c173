//! Batch stages run by the `monitor` commands: ingest exports into a
//! dataset, then fingerprint and cluster it.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{build_clusters, FingerprintFailure, FingerprintedMessage, Thresholds};
use crate::fingerprint::fingerprint_message;
use crate::ingest::{parse_export, MediaKind, ParsedExport, Pseudonymizer, RawMessage, Registry};
use crate::store::{self, BlobStore, Dataset};
use crate::{Error, Result};

/// Name of the optional chat registry at the root of an input directory.
pub const INPUT_REGISTRY: &str = "registry.json";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub files: usize,
    pub lines: usize,
    pub parsed: usize,
    pub invalid: usize,
    pub duplicates: usize,
    pub blobs_stored: usize,
    pub messages_total: usize,
}

/// Export files (`*.jsonl`) under `input`, sorted by path.
pub fn export_files(input: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(input).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::io(input, e.into()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "jsonl") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Parses every export under `input` and merges it into the dataset at
/// `dataset_dir`. Messages already present are counted as duplicates, so
/// re-running over the same input leaves the dataset unchanged.
pub fn ingest_dir(input: &Path, dataset_dir: &Path, pseudonymizer: &Pseudonymizer) -> Result<IngestReport> {
    let files = export_files(input)?;
    let parsed: Vec<ParsedExport> = files
        .par_iter()
        .map(|f| parse_export(f, pseudonymizer))
        .collect::<Result<_>>()?;

    let mut dataset = store::load_or_empty(dataset_dir)?;
    let registry_path = input.join(INPUT_REGISTRY);
    if registry_path.is_file() {
        for chat in Registry::load(&registry_path)?.iter() {
            dataset.registry.register(chat.clone())?;
        }
    }

    let blobs = BlobStore::open(dataset_dir);
    let mut report = IngestReport {
        files: files.len(),
        ..Default::default()
    };
    let mut known: HashSet<_> = dataset.messages.iter().map(RawMessage::key).collect();
    for export in parsed {
        report.lines += export.report.lines;
        report.invalid += export.report.invalid.len();
        report.duplicates += export.report.duplicates.len();
        for pending in &export.media {
            if !blobs.contains(&pending.blob.checksum) {
                let bytes = std::fs::read(&pending.source).map_err(|e| Error::io(&pending.source, e))?;
                let stored = blobs.put_blob(&bytes, pending.blob.media_kind)?;
                if stored.checksum != pending.blob.checksum {
                    return Err(Error::Rejected(format!("{} changed during ingest", pending.source.display())));
                }
                report.blobs_stored += 1;
            }
        }
        for msg in export.messages {
            if known.insert(msg.key()) {
                report.parsed += 1;
                dataset.messages.push(msg);
            } else {
                report.duplicates += 1;
            }
        }
    }
    dataset.normalize();
    report.messages_total = dataset.messages.len();
    store::snapshot(&dataset, dataset_dir)?;
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProcessReport {
    pub messages: usize,
    pub fingerprint_failures: usize,
    pub clusters_by_kind: std::collections::BTreeMap<MediaKind, usize>,
}

/// Fingerprints every message, in parallel. Failures are returned sorted by
/// message key.
pub fn fingerprint_all<'a>(
    messages: &'a [RawMessage],
    blobs: &BlobStore,
) -> (Vec<FingerprintedMessage<'a>>, Vec<FingerprintFailure>) {
    let results: Vec<_> = messages
        .par_iter()
        .map(|m| (m, fingerprint_message(m, |b| blobs.get_blob(b))))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (message, r) in results {
        match r {
            Ok(fingerprint) => ok.push(FingerprintedMessage { message, fingerprint }),
            Err(reason) => {
                tracing::warn!(key = %message.key(), "fingerprint failed: {reason}");
                failed.push(FingerprintFailure {
                    chat_id: message.chat_id.clone(),
                    msg_id: message.msg_id.clone(),
                    reason,
                })
            }
        }
    }
    failed.sort_by(|a, b| (&a.chat_id, &a.msg_id).cmp(&(&b.chat_id, &b.msg_id)));
    (ok, failed)
}

/// Recomputes fingerprints and clusters for a dataset in memory.
pub fn cluster_dataset(dataset: &mut Dataset, blobs: &BlobStore, thresholds: &Thresholds) {
    let (items, failures) = fingerprint_all(&dataset.messages, blobs);
    let clusters = build_clusters(&items, thresholds);
    dataset.clusters = clusters;
    dataset.fingerprint_failures = failures;
}

/// Fingerprints and clusters the dataset at `dataset_dir` and persists the
/// cluster table.
pub fn process_dataset(dataset_dir: &Path, thresholds: &Thresholds) -> Result<ProcessReport> {
    let mut dataset = store::load_snapshot(dataset_dir)?;
    let blobs = BlobStore::open(dataset_dir);
    cluster_dataset(&mut dataset, &blobs, thresholds);
    dataset.normalize();
    store::snapshot(&dataset, dataset_dir)?;
    let stats = dataset.stats();
    Ok(ProcessReport {
        messages: stats.messages,
        fingerprint_failures: stats.fingerprint_failures,
        clusters_by_kind: stats.clusters_by_kind,
    })
}
