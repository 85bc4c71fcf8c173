//! Groups messages that carry the same content.
//!
//! Two messages of the same kind are similar when their checksums are equal
//! (video, audio, document), their perceptual hashes are within the image
//! threshold, or their text shingles reach the Jaccard threshold. Clusters
//! are the connected components of that relation (single link), so the
//! result does not depend on input order.
//!
//! Text messages with fewer than two shingles merge only on equal
//! normalized text. Longer texts are compared only when they share at
//! least one shingle; pairs sharing none have Jaccard 0 and could never
//! qualify, so that pre-bucketing loses nothing.

mod bktree;
mod union_find;

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::fingerprint::{jaccard, Fingerprint, PHash64};
use crate::ingest::{MediaKind, MessageKey, RawMessage, Registry};
use crate::store::BlobRef;
use crate::{Error, Result};

pub use bktree::{query_near, HammingIndex};
pub use union_find::UnionFind;

/// Similarity operating points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Images merge at Hamming distance `<=` this.
    pub image_hamming: u32,
    /// Texts merge at Jaccard `>=` this.
    pub text_jaccard: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            image_hamming: 10,
            text_jaccard: 0.7,
        }
    }
}

/// A message together with its successfully computed fingerprint.
#[derive(Clone, Debug)]
pub struct FingerprintedMessage<'a> {
    pub message: &'a RawMessage,
    pub fingerprint: Fingerprint,
}

/// A message left out of clustering because its content could not be
/// fingerprinted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintFailure {
    pub chat_id: String,
    pub msg_id: String,
    pub reason: String,
}

impl FingerprintFailure {
    pub fn key(&self) -> MessageKey {
        MessageKey::new(&self.chat_id, &self.msg_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representative {
    Blob(BlobRef),
    /// Original text of the earliest member.
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterMember {
    pub chat_id: String,
    pub msg_id: String,
    /// Hex fingerprint of this member.
    pub fingerprint: String,
}

impl ClusterMember {
    pub fn key(&self) -> MessageKey {
        MessageKey::new(&self.chat_id, &self.msg_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentCluster {
    /// `<kind>-<smallest member fingerprint hex>`.
    pub cluster_id: String,
    pub kind: MediaKind,
    pub representative: Representative,
    /// Sorted by `(chat_id, msg_id)`.
    pub members: Vec<ClusterMember>,
    pub share_count: u64,
    pub distinct_groups: u64,
    pub distinct_senders: u64,
    #[serde(with = "crate::ingest::utc_seconds")]
    pub first_seen: DateTime<Utc>,
    #[serde(with = "crate::ingest::utc_seconds")]
    pub last_seen: DateTime<Utc>,
}

impl ContentCluster {
    /// Checks the counter and ordering invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::Rejected(format!("{}: {reason}", self.cluster_id)));
        if self.members.is_empty() || self.share_count != self.members.len() as u64 {
            return fail(format!("share_count {} for {} members", self.share_count, self.members.len()));
        }
        if self.distinct_groups == 0
            || self.distinct_senders == 0
            || self.distinct_groups > self.share_count
            || self.distinct_senders > self.share_count
        {
            return fail("distinct counters out of range".into());
        }
        if self.first_seen > self.last_seen {
            return fail("first_seen after last_seen".into());
        }
        if !self.members.windows(2).all(|w| w[0].key() < w[1].key()) {
            return fail("members not strictly sorted".into());
        }
        Ok(())
    }
}

/// Clusters already-fingerprinted messages. Output is sorted by
/// `cluster_id`.
///
/// # Panics
///
/// If a fingerprint variant does not fit its message kind.
pub fn build_clusters(items: &[FingerprintedMessage<'_>], thresholds: &Thresholds) -> Vec<ContentCluster> {
    let mut by_kind: HashMap<MediaKind, Vec<usize>> = HashMap::new();
    for (i, item) in items.iter().enumerate() {
        by_kind.entry(item.message.media_kind).or_default().push(i);
    }

    let mut uf = UnionFind::new(items.len());
    for (kind, idx) in &by_kind {
        match kind {
            MediaKind::Image => link_images(items, idx, thresholds.image_hamming, &mut uf),
            MediaKind::Text => link_texts(items, idx, thresholds.text_jaccard, &mut uf),
            _ => link_checksums(items, idx, &mut uf),
        }
    }

    let mut clusters: Vec<ContentCluster> = uf
        .groups()
        .into_iter()
        .map(|group| make_cluster(items, &group))
        .collect();
    clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
    clusters
}

fn link_checksums(items: &[FingerprintedMessage<'_>], idx: &[usize], uf: &mut UnionFind) {
    let mut first = HashMap::new();
    for &i in idx {
        let Fingerprint::Checksum(c) = &items[i].fingerprint else {
            panic!("{} message without checksum fingerprint", items[i].message.media_kind);
        };
        let root = *first.entry(*c).or_insert(i);
        uf.union(root, i);
    }
}

fn link_images(items: &[FingerprintedMessage<'_>], idx: &[usize], radius: u32, uf: &mut UnionFind) {
    let mut first: HashMap<PHash64, usize> = HashMap::new();
    for &i in idx {
        let Fingerprint::Image(h) = items[i].fingerprint else {
            panic!("image message without perceptual hash");
        };
        let root = *first.entry(h).or_insert(i);
        uf.union(root, i);
    }
    let index: HammingIndex = first.keys().copied().collect();
    for (h, &i) in &first {
        for (_, near) in index.query(*h, radius) {
            uf.union(i, first[&near]);
        }
    }
}

fn link_texts(items: &[FingerprintedMessage<'_>], idx: &[usize], threshold: f64, uf: &mut UnionFind) {
    let print = |i: usize| match &items[i].fingerprint {
        Fingerprint::Text(t) => t,
        _ => panic!("text message without text fingerprint"),
    };

    let mut exact: HashMap<&str, usize> = HashMap::new();
    let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut long = Vec::new();
    for &i in idx {
        let t = print(i);
        if t.shingles.len() < 2 {
            let root = *exact.entry(t.normalized.as_str()).or_insert(i);
            uf.union(root, i);
        } else {
            long.push(i);
            for s in t.shingles.iter() {
                postings.entry(s).or_default().push(i);
            }
        }
    }

    // Compare each pair sharing a shingle once, from its smaller index.
    let mut seen_by: HashMap<usize, usize> = HashMap::new();
    for &i in &long {
        let a = print(i);
        for s in a.shingles.iter() {
            for &j in &postings[s] {
                if j <= i || seen_by.insert(j, i) == Some(i) {
                    continue;
                }
                if jaccard(&a.shingles, &print(j).shingles) >= threshold {
                    uf.union(i, j);
                }
            }
        }
    }
}

fn make_cluster(items: &[FingerprintedMessage<'_>], group: &[usize]) -> ContentCluster {
    let msgs: Vec<&RawMessage> = group.iter().map(|&i| items[i].message).collect();
    let kind = msgs[0].media_kind;

    let mut members: Vec<ClusterMember> = group
        .iter()
        .map(|&i| ClusterMember {
            chat_id: items[i].message.chat_id.clone(),
            msg_id: items[i].message.msg_id.clone(),
            fingerprint: items[i].fingerprint.hex(),
        })
        .collect();
    members.sort();
    let smallest = members.iter().map(|m| m.fingerprint.as_str()).min().expect("non-empty group");

    let earliest = group
        .iter()
        .map(|&i| &items[i])
        .min_by(|a, b| {
            let ka = (a.message.sent_at, &a.message.chat_id, &a.message.msg_id);
            let kb = (b.message.sent_at, &b.message.chat_id, &b.message.msg_id);
            ka.cmp(&kb)
        })
        .expect("non-empty group");
    let representative = match (&earliest.fingerprint, &earliest.message.media_ref) {
        (Fingerprint::Text(t), _) => Representative::Text(earliest.message.text.clone().unwrap_or_else(|| t.normalized.clone())),
        (_, Some(blob)) => Representative::Blob(blob.clone()),
        (_, None) => panic!("media message without blob reference"),
    };

    let counts = MemberCounts::of(msgs.iter().copied());
    ContentCluster {
        cluster_id: format!("{kind}-{smallest}"),
        kind,
        representative,
        share_count: members.len() as u64,
        members,
        distinct_groups: counts.distinct_groups,
        distinct_senders: counts.distinct_senders,
        first_seen: counts.first_seen.expect("non-empty group"),
        last_seen: counts.last_seen.expect("non-empty group"),
    }
}

/// Popularity counters over some set of messages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemberCounts {
    pub share_count: u64,
    pub distinct_groups: u64,
    pub distinct_senders: u64,
    pub first_seen: Option<DateTime<Utc>>,
    pub last_seen: Option<DateTime<Utc>>,
}

impl MemberCounts {
    pub fn of<'a>(msgs: impl IntoIterator<Item = &'a RawMessage>) -> Self {
        let mut chats = BTreeSet::new();
        let mut senders = BTreeSet::new();
        let mut out = MemberCounts::default();
        for m in msgs {
            out.share_count += 1;
            chats.insert(m.chat_id.as_str());
            senders.insert(&m.sender);
            out.first_seen = Some(out.first_seen.map_or(m.sent_at, |t| t.min(m.sent_at)));
            out.last_seen = Some(out.last_seen.map_or(m.sent_at, |t| t.max(m.sent_at)));
        }
        out.distinct_groups = chats.len() as u64;
        out.distinct_senders = senders.len() as u64;
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterStats {
    pub share_count: u64,
    pub distinct_groups: u64,
    pub distinct_senders: u64,
    /// Sorted, deduplicated.
    pub group_titles: Vec<String>,
}

/// Recounts a cluster from the message store. Members missing from the
/// store are an integrity error.
pub fn cluster_stats<'a>(
    cluster: &ContentCluster,
    lookup: impl Fn(&MessageKey) -> Option<&'a RawMessage>,
    registry: &Registry,
) -> Result<ClusterStats> {
    let msgs = cluster
        .members
        .iter()
        .map(|m| {
            lookup(&m.key()).ok_or_else(|| Error::Integrity {
                file: "clusters".into(),
                line: 0,
                reason: format!("cluster {} references missing message {}", cluster.cluster_id, m.key()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(stats_of(msgs, registry))
}

pub(crate) fn stats_of<'a>(msgs: impl IntoIterator<Item = &'a RawMessage>, registry: &Registry) -> ClusterStats {
    let msgs: Vec<&RawMessage> = msgs.into_iter().collect();
    let counts = MemberCounts::of(msgs.iter().copied());
    let titles: BTreeSet<&str> = msgs.iter().map(|m| registry.title(&m.chat_id)).collect();
    ClusterStats {
        share_count: counts.share_count,
        distinct_groups: counts.distinct_groups,
        distinct_senders: counts.distinct_senders,
        group_titles: titles.into_iter().map(str::to_owned).collect(),
    }
}
