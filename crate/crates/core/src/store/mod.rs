//! On-disk dataset.
//!
//! ```text
//! <dataset>/
//!   meta.json        format version, counts, fingerprint failures, table digests
//!   registry.json    JSON array of chat records
//!   messages.jsonl   one message per line
//!   clusters.jsonl   one content cluster per line
//!   blobs/<2 hex>/<32 hex>
//! ```
//!
//! `meta.json` holds a SHA-256 digest for `registry.json` and a digest per
//! line for the JSON Lines tables, so a damaged line is reported by number.
//! Every table is written to a temporary file and renamed into place;
//! `meta.json` is renamed last and is the commit point of a snapshot.

mod blob;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{ContentCluster, FingerprintFailure};
use crate::ingest::{MediaKind, MessageKey, RawMessage, Registry};
use crate::{Error, Result};

pub use blob::{BlobRef, BlobStore};

pub const FORMAT_VERSION: u32 = 1;

pub const META_FILE: &str = "meta.json";
pub const REGISTRY_FILE: &str = "registry.json";
pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const CLUSTERS_FILE: &str = "clusters.jsonl";

/// In-memory tables of a dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub registry: Registry,
    /// Ordered by `(sent_at, chat_id, msg_id)` once [`Dataset::normalize`] ran.
    pub messages: Vec<RawMessage>,
    /// Ordered by `cluster_id`.
    pub clusters: Vec<ContentCluster>,
    pub fingerprint_failures: Vec<FingerprintFailure>,
}

impl Dataset {
    /// Puts every table into its canonical order.
    pub fn normalize(&mut self) {
        self.messages
            .sort_by(|a, b| (a.sent_at, &a.chat_id, &a.msg_id).cmp(&(b.sent_at, &b.chat_id, &b.msg_id)));
        self.clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
        self.fingerprint_failures
            .sort_by(|a, b| (&a.chat_id, &a.msg_id).cmp(&(&b.chat_id, &b.msg_id)));
    }

    pub fn stats(&self) -> DatasetStats {
        let mut stats = DatasetStats {
            chats: self.registry.len(),
            messages: self.messages.len(),
            clusters: self.clusters.len(),
            fingerprint_failures: self.fingerprint_failures.len(),
            blobs: self
                .messages
                .iter()
                .filter_map(|m| m.media_ref.as_ref().map(|b| b.checksum))
                .collect::<HashSet<_>>()
                .len(),
            ..Default::default()
        };
        for m in &self.messages {
            *stats.messages_by_kind.entry(m.media_kind).or_default() += 1;
        }
        for c in &self.clusters {
            *stats.clusters_by_kind.entry(c.kind).or_default() += 1;
        }
        stats
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub chats: usize,
    pub messages: usize,
    pub clusters: usize,
    pub blobs: usize,
    pub fingerprint_failures: usize,
    pub messages_by_kind: BTreeMap<MediaKind, usize>,
    pub clusters_by_kind: BTreeMap<MediaKind, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct LinesDigest {
    lines: usize,
    line_sha256: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct TableDigests {
    registry_sha256: String,
    messages: LinesDigest,
    clusters: LinesDigest,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    stats: DatasetStats,
    fingerprint_failures: Vec<FingerprintFailure>,
    tables: TableDigests,
}

/// Short digest used per line: the first 16 hex digits of SHA-256.
fn line_digest(line: &[u8]) -> String {
    hex::encode(&Sha256::digest(line)[..8])
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<(Vec<u8>, LinesDigest)> {
    let mut out = Vec::new();
    let mut digest = LinesDigest::default();
    for row in rows {
        let line = serde_json::to_vec(row)?;
        digest.line_sha256.push(line_digest(&line));
        out.extend_from_slice(&line);
        out.push(b'\n');
    }
    digest.lines = rows.len();
    Ok((out, digest))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes the tables of `dataset` under `dir`. Blobs are written separately
/// through [`BlobStore`].
pub fn snapshot(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let registry = dataset.registry.to_json();
    let (messages, messages_digest) = jsonl(&dataset.messages)?;
    let (clusters, clusters_digest) = jsonl(&dataset.clusters)?;
    let meta = Meta {
        format_version: FORMAT_VERSION,
        stats: dataset.stats(),
        fingerprint_failures: dataset.fingerprint_failures.clone(),
        tables: TableDigests {
            registry_sha256: hex::encode(Sha256::digest(&registry)),
            messages: messages_digest,
            clusters: clusters_digest,
        },
    };
    let mut meta_bytes = serde_json::to_vec_pretty(&meta)?;
    meta_bytes.push(b'\n');

    write_atomic(&dir.join(REGISTRY_FILE), &registry)?;
    write_atomic(&dir.join(MESSAGES_FILE), &messages)?;
    write_atomic(&dir.join(CLUSTERS_FILE), &clusters)?;
    write_atomic(&dir.join(META_FILE), &meta_bytes)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn integrity(file: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::Integrity {
        file: file.into(),
        line,
        reason: reason.into(),
    }
}

fn load_jsonl<T: for<'de> Deserialize<'de>>(dir: &Path, file: &str, digest: &LinesDigest) -> Result<Vec<T>> {
    let bytes = read(&dir.join(file))?;
    let lines: Vec<&[u8]> = bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() != digest.lines || digest.line_sha256.len() != digest.lines {
        return Err(integrity(
            file,
            lines.len().min(digest.lines) + 1,
            format!("expected {} lines, found {}", digest.lines, lines.len()),
        ));
    }
    lines
        .iter()
        .zip(&digest.line_sha256)
        .enumerate()
        .map(|(i, (line, want))| {
            if line_digest(line) != *want {
                return Err(integrity(file, i + 1, "line checksum mismatch"));
            }
            serde_json::from_slice(line).map_err(|e| integrity(file, i + 1, e.to_string()))
        })
        .collect()
}

/// Reads a dataset written by [`snapshot`], verifying digests and
/// referential integrity.
pub fn load_snapshot(dir: &Path) -> Result<Dataset> {
    let meta_bytes = read(&dir.join(META_FILE))?;
    let version: serde_json::Value = serde_json::from_slice(&meta_bytes)?;
    let found = version
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| integrity(META_FILE, 1, "missing format_version"))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::Migration {
            found: found as u32,
            expected: FORMAT_VERSION,
        });
    }
    let meta: Meta = serde_json::from_slice(&meta_bytes).map_err(|e| integrity(META_FILE, e.line(), e.to_string()))?;

    let registry_bytes = read(&dir.join(REGISTRY_FILE))?;
    if hex::encode(Sha256::digest(&registry_bytes)) != meta.tables.registry_sha256 {
        return Err(integrity(REGISTRY_FILE, 0, "file checksum mismatch"));
    }
    let registry = Registry::from_json(&registry_bytes).map_err(|e| integrity(REGISTRY_FILE, 0, e.to_string()))?;
    let messages: Vec<RawMessage> = load_jsonl(dir, MESSAGES_FILE, &meta.tables.messages)?;
    let clusters: Vec<ContentCluster> = load_jsonl(dir, CLUSTERS_FILE, &meta.tables.clusters)?;

    let blobs = BlobStore::open(dir);
    let failed: HashSet<MessageKey> = meta.fingerprint_failures.iter().map(FingerprintFailure::key).collect();
    let mut keys = HashSet::with_capacity(messages.len());
    for (i, m) in messages.iter().enumerate() {
        let line = i + 1;
        m.validate().map_err(|e| integrity(MESSAGES_FILE, line, e.to_string()))?;
        if !keys.insert(m.key()) {
            return Err(integrity(MESSAGES_FILE, line, format!("duplicate message {}", m.key())));
        }
        if let Some(blob) = &m.media_ref {
            if !blobs.contains(&blob.checksum) && !failed.contains(&m.key()) {
                return Err(integrity(MESSAGES_FILE, line, format!("blob {} is missing", blob.checksum)));
            }
        }
    }
    let mut clustered = HashSet::new();
    for (i, c) in clusters.iter().enumerate() {
        let line = i + 1;
        c.validate().map_err(|e| integrity(CLUSTERS_FILE, line, e.to_string()))?;
        for member in &c.members {
            let key = member.key();
            if !keys.contains(&key) {
                return Err(integrity(CLUSTERS_FILE, line, format!("member {key} has no message")));
            }
            if !clustered.insert(key) {
                return Err(integrity(CLUSTERS_FILE, line, format!("member {} is in two clusters", member.key())));
            }
        }
    }

    Ok(Dataset {
        registry,
        messages,
        clusters,
        fingerprint_failures: meta.fingerprint_failures,
    })
}

/// Loads the dataset at `dir`, or an empty one if nothing was written yet.
pub fn load_or_empty(dir: &Path) -> Result<Dataset> {
    if dir.join(META_FILE).exists() {
        load_snapshot(dir)
    } else {
        Ok(Dataset::default())
    }
}

/// Paths of every file a snapshot writes, for callers that compare datasets.
pub fn table_paths(dir: &Path) -> [PathBuf; 4] {
    [META_FILE, REGISTRY_FILE, MESSAGES_FILE, CLUSTERS_FILE].map(|f| dir.join(f))
}
