//! Per-period popularity rankings and corpus statistics.
//!
//! A day is the UTC calendar date of `sent_at`. Clusters are built once
//! over the whole corpus; a period query recounts each cluster using only
//! its members sent inside the period.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use crate::cluster::{stats_of, ContentCluster, MemberCounts, Representative};
use crate::fingerprint::Checksum128;
use crate::ingest::{ChatKind, MediaKind, MessageKey, RawMessage, Registry};
use crate::store::{BlobRef, Dataset};
use crate::{Error, Result};

/// Inclusive range of UTC calendar dates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Period {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl Period {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from > to {
            return Err(Error::Request(format!("period starts ({from}) after it ends ({to})")));
        }
        Ok(Period { from, to })
    }

    pub fn day(day: NaiveDate) -> Self {
        Period { from: day, to: day }
    }

    /// Parses two `YYYY-MM-DD` dates.
    pub fn parse(from: &str, to: &str) -> Result<Self> {
        let date = |s: &str| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Request(format!("bad date {s:?}: {e}")))
        };
        Period::new(date(from)?, date(to)?)
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        (self.from..=self.to).contains(&ts.date_naive())
    }

    fn start(&self) -> DateTime<Utc> {
        self.from.and_time(NaiveTime::MIN).and_utc()
    }

    /// First instant after the period.
    fn end_exclusive(&self) -> DateTime<Utc> {
        (self.to + Duration::days(1)).and_time(NaiveTime::MIN).and_utc()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.from, self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub cluster_id: String,
    pub period_share_count: u64,
    pub period_distinct_groups: u64,
    pub period_distinct_senders: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContentDetails {
    pub cluster_id: String,
    pub kind: MediaKind,
    pub period: Option<Period>,
    pub share_count: u64,
    pub distinct_groups: u64,
    pub distinct_senders: u64,
    pub group_titles: Vec<String>,
    pub representative: Representative,
    /// Only for images.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverse_search_url: Option<String>,
}

/// Characters left unescaped in a query value: RFC 3986 unreserved.
const QUERY_VALUE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// Path under which the API serves a payload.
pub fn media_path(checksum: &Checksum128) -> String {
    format!("/api/media/{checksum}")
}

/// Reverse image search link for a publicly reachable media URL. The URL is
/// only constructed, never fetched.
pub fn reverse_search_url(public_media_url: &str) -> String {
    format!(
        "https://lens.google.com/uploadbyurl?url={}",
        utf8_percent_encode(public_media_url, QUERY_VALUE)
    )
}

/// Read-only, indexed view over a loaded dataset.
#[derive(Debug)]
pub struct Catalog {
    dataset: Dataset,
    by_key: HashMap<MessageKey, usize>,
    by_cluster: HashMap<String, usize>,
    /// Per cluster, member message indices ordered by `sent_at`.
    members: Vec<Vec<usize>>,
    blobs: HashMap<Checksum128, BlobRef>,
}

impl Catalog {
    /// Indexes a dataset. Cluster members without a message are an
    /// integrity error.
    pub fn new(dataset: Dataset) -> Result<Self> {
        let by_key: HashMap<MessageKey, usize> =
            dataset.messages.iter().enumerate().map(|(i, m)| (m.key(), i)).collect();
        let mut members = Vec::with_capacity(dataset.clusters.len());
        let mut by_cluster = HashMap::with_capacity(dataset.clusters.len());
        for (ci, c) in dataset.clusters.iter().enumerate() {
            let mut idx = c
                .members
                .iter()
                .map(|m| {
                    by_key.get(&m.key()).copied().ok_or_else(|| Error::Integrity {
                        file: crate::store::CLUSTERS_FILE.into(),
                        line: ci + 1,
                        reason: format!("cluster {} references missing message {}", c.cluster_id, m.key()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            idx.sort_by_key(|&i| dataset.messages[i].sent_at);
            members.push(idx);
            by_cluster.insert(c.cluster_id.clone(), ci);
        }
        let blobs = dataset
            .messages
            .iter()
            .filter_map(|m| m.media_ref.clone())
            .map(|b| (b.checksum, b))
            .collect();
        Ok(Catalog {
            dataset,
            by_key,
            by_cluster,
            members,
            blobs,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn message(&self, key: &MessageKey) -> Option<&RawMessage> {
        self.by_key.get(key).map(|&i| &self.dataset.messages[i])
    }

    pub fn cluster(&self, cluster_id: &str) -> Option<&ContentCluster> {
        self.by_cluster.get(cluster_id).map(|&i| &self.dataset.clusters[i])
    }

    pub fn blob(&self, checksum: &Checksum128) -> Option<&BlobRef> {
        self.blobs.get(checksum)
    }

    /// Members of cluster `ci` sent inside `period` (all when `None`).
    fn members_in(&self, ci: usize, period: Option<Period>) -> impl Iterator<Item = &RawMessage> {
        let idx = &self.members[ci];
        let msgs = &self.dataset.messages;
        let (lo, hi) = match period {
            None => (0, idx.len()),
            Some(p) => (
                idx.partition_point(|&i| msgs[i].sent_at < p.start()),
                idx.partition_point(|&i| msgs[i].sent_at < p.end_exclusive()),
            ),
        };
        idx[lo..hi].iter().map(move |&i| &msgs[i])
    }

    /// Most shared clusters of `kind` in `period`, best first.
    ///
    /// Order: in-period shares, then in-period groups, then in-period
    /// senders (all descending), then the cluster's `first_seen` and
    /// `cluster_id` (ascending).
    pub fn top_content(&self, period: Period, kind: MediaKind, limit: usize) -> Result<Vec<RankingEntry>> {
        if limit == 0 {
            return Err(Error::Request("limit must be at least 1".into()));
        }
        let mut scored: Vec<(MemberCounts, &ContentCluster)> = self
            .dataset
            .clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(ci, c)| (MemberCounts::of(self.members_in(ci, Some(period))), c))
            .filter(|(counts, _)| counts.share_count > 0)
            .collect();
        scored.sort_by(|(a, ca), (b, cb)| ranking_order(a, ca, b, cb));
        Ok(scored
            .into_iter()
            .take(limit)
            .enumerate()
            .map(|(i, (counts, c))| RankingEntry {
                rank: i + 1,
                cluster_id: c.cluster_id.clone(),
                period_share_count: counts.share_count,
                period_distinct_groups: counts.distinct_groups,
                period_distinct_senders: counts.distinct_senders,
            })
            .collect())
    }

    /// Spread of one cluster in `period` (whole corpus when `None`).
    /// `public_base_url` is the externally visible origin of the API, used
    /// for the reverse image search link.
    pub fn content_details(
        &self,
        cluster_id: &str,
        period: Option<Period>,
        public_base_url: &str,
    ) -> Result<ContentDetails> {
        let ci = *self
            .by_cluster
            .get(cluster_id)
            .ok_or_else(|| Error::NotFound(format!("cluster {cluster_id}")))?;
        let cluster = &self.dataset.clusters[ci];
        let stats = stats_of(self.members_in(ci, period), &self.dataset.registry);
        let reverse_search_url = match (&cluster.representative, cluster.kind) {
            (Representative::Blob(b), MediaKind::Image) => Some(reverse_search_url(&format!(
                "{}{}",
                public_base_url.trim_end_matches('/'),
                media_path(&b.checksum)
            ))),
            _ => None,
        };
        Ok(ContentDetails {
            cluster_id: cluster.cluster_id.clone(),
            kind: cluster.kind,
            period,
            share_count: stats.share_count,
            distinct_groups: stats.distinct_groups,
            distinct_senders: stats.distinct_senders,
            group_titles: stats.group_titles,
            representative: cluster.representative.clone(),
            reverse_search_url,
        })
    }

    pub fn members_cdf(&self, kind: Option<ChatKind>) -> Result<Vec<CdfPoint>> {
        members_cdf(&self.dataset.registry, kind)
    }

    pub fn weekly_volume(&self) -> Vec<WeekCount> {
        weekly_volume(self.dataset.messages.iter().map(|m| m.sent_at))
    }
}

fn ranking_order(a: &MemberCounts, ca: &ContentCluster, b: &MemberCounts, cb: &ContentCluster) -> Ordering {
    b.share_count
        .cmp(&a.share_count)
        .then(b.distinct_groups.cmp(&a.distinct_groups))
        .then(b.distinct_senders.cmp(&a.distinct_senders))
        .then(ca.first_seen.cmp(&cb.first_seen))
        .then_with(|| ca.cluster_id.cmp(&cb.cluster_id))
}

/// Free-function form of [`Catalog::top_content`].
pub fn top_content(catalog: &Catalog, period: Period, kind: MediaKind, limit: usize) -> Result<Vec<RankingEntry>> {
    catalog.top_content(period, kind, limit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub member_count: u64,
    pub cumulative_fraction: f64,
}

/// Empirical CDF of member counts, one point per distinct count, ending
/// at exactly 1.0. `kind` restricts it to groups or channels.
pub fn members_cdf(registry: &Registry, kind: Option<ChatKind>) -> Result<Vec<CdfPoint>> {
    let mut counts: Vec<u64> = registry
        .iter()
        .filter(|c| kind.map_or(true, |k| c.kind == k))
        .map(|c| c.member_count)
        .collect();
    if counts.is_empty() {
        return Err(Error::Request("no chats to compute a distribution over".into()));
    }
    counts.sort_unstable();
    let n = counts.len();
    let mut points = Vec::new();
    for (i, &m) in counts.iter().enumerate() {
        if i + 1 == n || counts[i + 1] != m {
            points.push(CdfPoint {
                member_count: m,
                cumulative_fraction: (i + 1) as f64 / n as f64,
            });
        }
    }
    Ok(points)
}

/// Share of chats with more than `threshold` members, read off a CDF.
pub fn fraction_above(cdf: &[CdfPoint], threshold: u64) -> f64 {
    let at_or_below = cdf
        .iter()
        .take_while(|p| p.member_count <= threshold)
        .last()
        .map_or(0.0, |p| p.cumulative_fraction);
    1.0 - at_or_below
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekCount {
    /// ISO-8601 week, e.g. `2021-W09`.
    pub week: String,
    pub count: u64,
}

/// Message counts per ISO week (Monday start, UTC), ascending, with empty
/// weeks inside the observed range reported as 0.
pub fn weekly_volume(timestamps: impl IntoIterator<Item = DateTime<Utc>>) -> Vec<WeekCount> {
    let mut by_monday: HashMap<NaiveDate, u64> = HashMap::new();
    for ts in timestamps {
        let d = ts.date_naive();
        let monday = d - Duration::days(i64::from(d.weekday().num_days_from_monday()));
        *by_monday.entry(monday).or_default() += 1;
    }
    let (Some(&first), Some(&last)) = (by_monday.keys().min(), by_monday.keys().max()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut week = first;
    while week <= last {
        out.push(WeekCount {
            week: week.format("%G-W%V").to_string(),
            count: by_monday.get(&week).copied().unwrap_or(0),
        });
        week += Duration::days(7);
    }
    out
}
