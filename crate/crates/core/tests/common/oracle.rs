//! Brute-force reference computations for clusters and rankings.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use telemonitor::cluster::ContentCluster;
use telemonitor::fingerprint::Fingerprint;
use telemonitor::ingest::{MediaKind, RawMessage};
use telemonitor::rank::RankingEntry;
use telemonitor::store::Dataset;

/// Link rule applied to one pair, spelled out directly.
fn linked(a: &(&RawMessage, &Fingerprint, Option<BTreeSet<&str>>), b: &(&RawMessage, &Fingerprint, Option<BTreeSet<&str>>)) -> bool {
    if a.0.media_kind != b.0.media_kind {
        return false;
    }
    match (a.1, b.1) {
        (Fingerprint::Image(x), Fingerprint::Image(y)) => (x.0 ^ y.0).count_ones() <= 10,
        (Fingerprint::Checksum(x), Fingerprint::Checksum(y)) => x == y,
        (Fingerprint::Text(x), Fingerprint::Text(y)) => {
            let (sx, sy) = (a.2.as_ref().unwrap(), b.2.as_ref().unwrap());
            if sx.len() < 2 || sy.len() < 2 {
                return x.normalized == y.normalized;
            }
            let inter = sx.intersection(sy).count() as f64;
            let union = sx.union(sy).count() as f64;
            inter / union >= 0.7
        }
        _ => panic!("fingerprint kind mismatch"),
    }
}

/// Connected components of the all-pairs link graph, by flood fill.
pub fn partition(items: &[(&RawMessage, &Fingerprint)]) -> Vec<Vec<usize>> {
    let prepared: Vec<_> = items
        .iter()
        .map(|&(m, f)| {
            let set = match f {
                Fingerprint::Text(t) => Some(t.shingles.iter().collect::<BTreeSet<&str>>()),
                _ => None,
            };
            (m, f, set)
        })
        .collect();
    let n = items.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if linked(&prepared[i], &prepared[j]) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut group = Vec::new();
        while let Some(v) = stack.pop() {
            group.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        groups.push(group);
    }
    groups
}

/// What a cluster must look like, independent of representation.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClusterFacts {
    pub members: Vec<(String, String)>,
    pub cluster_id: String,
    pub share_count: u64,
    pub distinct_groups: u64,
    pub distinct_senders: u64,
    pub first_seen: i64,
    pub last_seen: i64,
}

pub fn expected_clusters(items: &[(&RawMessage, &Fingerprint)]) -> BTreeSet<ClusterFacts> {
    partition(items)
        .into_iter()
        .map(|g| {
            let msgs: Vec<&RawMessage> = g.iter().map(|&i| items[i].0).collect();
            let mut members: Vec<(String, String)> =
                msgs.iter().map(|m| (m.chat_id.clone(), m.msg_id.clone())).collect();
            members.sort();
            let smallest = g.iter().map(|&i| items[i].1.hex()).min().unwrap();
            ClusterFacts {
                members,
                cluster_id: format!("{}-{smallest}", msgs[0].media_kind),
                share_count: g.len() as u64,
                distinct_groups: msgs.iter().map(|m| &m.chat_id).collect::<BTreeSet<_>>().len() as u64,
                distinct_senders: msgs.iter().map(|m| &m.sender).collect::<BTreeSet<_>>().len() as u64,
                first_seen: msgs.iter().map(|m| m.sent_at.timestamp()).min().unwrap(),
                last_seen: msgs.iter().map(|m| m.sent_at.timestamp()).max().unwrap(),
            }
        })
        .collect()
}

pub fn facts(clusters: &[ContentCluster]) -> BTreeSet<ClusterFacts> {
    clusters
        .iter()
        .map(|c| ClusterFacts {
            members: c.members.iter().map(|m| (m.chat_id.clone(), m.msg_id.clone())).collect(),
            cluster_id: c.cluster_id.clone(),
            share_count: c.share_count,
            distinct_groups: c.distinct_groups,
            distinct_senders: c.distinct_senders,
            first_seen: c.first_seen.timestamp(),
            last_seen: c.last_seen.timestamp(),
        })
        .collect()
}

/// Ranking recomputed from the raw tables: count each cluster's members
/// whose UTC date lies in the period, then sort by the documented keys.
pub fn ranking(ds: &Dataset, from: NaiveDate, to: NaiveDate, kind: MediaKind) -> Vec<RankingEntry> {
    let by_key: BTreeMap<(&str, &str), &RawMessage> =
        ds.messages.iter().map(|m| ((m.chat_id.as_str(), m.msg_id.as_str()), m)).collect();
    let mut rows = Vec::new();
    for c in ds.clusters.iter().filter(|c| c.kind == kind) {
        let inside: Vec<&RawMessage> = c
            .members
            .iter()
            .map(|m| by_key[&(m.chat_id.as_str(), m.msg_id.as_str())])
            .filter(|m| {
                let d = m.sent_at.date_naive();
                from <= d && d <= to
            })
            .collect();
        if inside.is_empty() {
            continue;
        }
        let shares = inside.len() as u64;
        let groups = inside.iter().map(|m| &m.chat_id).collect::<BTreeSet<_>>().len() as u64;
        let senders = inside.iter().map(|m| &m.sender).collect::<BTreeSet<_>>().len() as u64;
        rows.push((Reverse(shares), Reverse(groups), Reverse(senders), c.first_seen, c.cluster_id.clone()));
    }
    rows.sort();
    rows.into_iter()
        .enumerate()
        .map(|(i, (s, g, p, _, id))| RankingEntry {
            rank: i + 1,
            cluster_id: id,
            period_share_count: s.0,
            period_distinct_groups: g.0,
            period_distinct_senders: p.0,
        })
        .collect()
}
