//! Chat-export ingestion.
//!
//! Exports are JSON Lines files, one message per line:
//!
//! ```text
//! {"msg_id":"1","chat_id":"c1","sender_id":"u9","sent_at":"2021-03-01T10:00:00Z","media_kind":"text","text":"olá"}
//! {"msg_id":"2","chat_id":"c1","sender_id":"u3","sent_at":"2021-03-01T10:05:12Z","media_kind":"image","media_path":"media/a.jpg"}
//! ```
//!
//! `media_path` is resolved relative to the directory holding the export
//! file. Sender identifiers never leave this module in clear: they are
//! replaced by a keyed [`Pseudonym`] while the line is parsed.

mod links;
mod registry;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::fingerprint::checksum128;
use crate::store::BlobRef;
use crate::{Error, Result};

pub use links::{extract_invite_links, InviteLink};
pub use registry::{register_chat, ChatKind, ChatRecord, Registry, GROUP_MEMBER_CAP};

/// Kind of payload a message carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Text,
    Image,
    Video,
    Audio,
    Document,
}

impl MediaKind {
    pub const ALL: [MediaKind; 5] = [
        MediaKind::Text,
        MediaKind::Image,
        MediaKind::Video,
        MediaKind::Audio,
        MediaKind::Document,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Text => "text",
            MediaKind::Image => "image",
            MediaKind::Video => "video",
            MediaKind::Audio => "audio",
            MediaKind::Document => "document",
        }
    }
}

impl fmt::Display for MediaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MediaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MediaKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Request(format!("unknown media kind {s:?}")))
    }
}

/// Keyed, irreversible stand-in for a sender identifier: 32 lowercase hex
/// characters of HMAC-SHA256(secret, sender_id).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Pseudonym(String);

impl Pseudonym {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Pseudonym {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        let ok = value.len() == 32
            && value
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(Pseudonym(value))
        } else {
            Err(Error::Rejected(format!("{value:?} is not a pseudonym")))
        }
    }
}

impl From<Pseudonym> for String {
    fn from(p: Pseudonym) -> String {
        p.0
    }
}

impl fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Holds the pseudonymization key. Construct once at startup.
#[derive(Clone)]
pub struct Pseudonymizer {
    mac: Hmac<Sha256>,
}

impl fmt::Debug for Pseudonymizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Pseudonymizer { .. }")
    }
}

impl Pseudonymizer {
    pub fn new(secret: &[u8]) -> Result<Self> {
        if secret.is_empty() {
            return Err(Error::Config("pseudonymization secret is empty".into()));
        }
        let mac = Hmac::<Sha256>::new_from_slice(secret)
            .map_err(|e| Error::Config(format!("bad pseudonymization secret: {e}")))?;
        Ok(Pseudonymizer { mac })
    }

    pub fn pseudonymize(&self, sender_id: &str) -> Pseudonym {
        let mut mac = self.mac.clone();
        mac.update(sender_id.as_bytes());
        let digest = mac.finalize().into_bytes();
        Pseudonym(hex::encode(&digest[..16]))
    }
}

/// One-shot form of [`Pseudonymizer::pseudonymize`].
pub fn pseudonymize(sender_id: &str, secret: &[u8]) -> Result<Pseudonym> {
    Ok(Pseudonymizer::new(secret)?.pseudonymize(sender_id))
}

/// Identity of a message: `(chat_id, msg_id)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessageKey {
    pub chat_id: String,
    pub msg_id: String,
}

impl MessageKey {
    pub fn new(chat_id: impl Into<String>, msg_id: impl Into<String>) -> Self {
        MessageKey {
            chat_id: chat_id.into(),
            msg_id: msg_id.into(),
        }
    }
}

impl fmt::Display for MessageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.chat_id, self.msg_id)
    }
}

/// A normalized, pseudonymized chat message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMessage {
    pub msg_id: String,
    pub chat_id: String,
    pub sender: Pseudonym,
    #[serde(with = "utc_seconds")]
    pub sent_at: DateTime<Utc>,
    pub media_kind: MediaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<BlobRef>,
}

impl RawMessage {
    pub fn key(&self) -> MessageKey {
        MessageKey::new(&self.chat_id, &self.msg_id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.msg_id.is_empty() || self.chat_id.is_empty() {
            return Err(Error::Rejected("empty msg_id or chat_id".into()));
        }
        match (self.media_kind, &self.text, &self.media_ref) {
            (MediaKind::Text, None, _) => Err(Error::Rejected("text message without text".into())),
            (MediaKind::Text, _, Some(_)) => {
                Err(Error::Rejected("text message with a media reference".into()))
            }
            (kind, _, None) if kind != MediaKind::Text => {
                Err(Error::Rejected(format!("{kind} message without media")))
            }
            _ => Ok(()),
        }
    }

    /// Renders the message back into the export line schema, with the
    /// pseudonym in `sender_id` and the blob path in `media_path`.
    pub fn to_export_line(&self) -> ExportLine {
        ExportLine {
            msg_id: self.msg_id.clone(),
            chat_id: self.chat_id.clone(),
            sender_id: self.sender.to_string(),
            sent_at: utc_seconds::format(&self.sent_at),
            media_kind: self.media_kind,
            text: self.text.clone(),
            media_path: self.media_ref.as_ref().map(|r| r.relative_path()),
        }
    }
}

/// One line of an export file, as written by exporters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportLine {
    pub msg_id: String,
    pub chat_id: String,
    pub sender_id: String,
    pub sent_at: String,
    pub media_kind: MediaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_path: Option<String>,
}

impl ExportLine {
    /// Checks every schema rule that does not need the filesystem.
    pub fn validate(&self) -> Result<DateTime<Utc>> {
        for (name, v) in [
            ("msg_id", &self.msg_id),
            ("chat_id", &self.chat_id),
            ("sender_id", &self.sender_id),
        ] {
            if v.is_empty() {
                return Err(Error::Rejected(format!("empty {name}")));
            }
        }
        let sent_at = parse_utc(&self.sent_at)?;
        match self.media_kind {
            MediaKind::Text => {
                if self.text.is_none() {
                    return Err(Error::Rejected("text message without text".into()));
                }
                if self.media_path.is_some() {
                    return Err(Error::Rejected("text message with media_path".into()));
                }
            }
            kind => {
                if self.media_path.as_deref().map_or(true, str::is_empty) {
                    return Err(Error::Rejected(format!("{kind} message without media_path")));
                }
            }
        }
        Ok(sent_at)
    }
}

/// Parses an RFC 3339 timestamp, accepting only a zero UTC offset.
/// Sub-second precision is truncated.
pub fn parse_utc(s: &str) -> Result<DateTime<Utc>> {
    let ts = DateTime::parse_from_rfc3339(s)
        .map_err(|e| Error::Rejected(format!("bad timestamp {s:?}: {e}")))?;
    if ts.offset().local_minus_utc() != 0 {
        return Err(Error::Rejected(format!("timestamp {s:?} is not UTC")));
    }
    Ok(ts.with_timezone(&Utc).trunc_subsecs(0))
}

pub(crate) mod utc_seconds {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(ts: &DateTime<Utc>) -> String {
        ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_utc(&s).map_err(serde::de::Error::custom)
    }
}

/// A line that was not turned into a message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineIssue {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub lines: usize,
    pub parsed: usize,
    pub invalid: Vec<LineIssue>,
    pub duplicates: Vec<LineIssue>,
}

/// Media payload found next to an export, not yet copied into the blob store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingBlob {
    pub blob: BlobRef,
    pub source: PathBuf,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedExport {
    pub messages: Vec<RawMessage>,
    pub media: Vec<PendingBlob>,
    pub report: ParseReport,
}

/// Parses one export file. Bad lines are reported and skipped; only an
/// unreadable file is fatal.
pub fn parse_export(path: &Path, pseudonymizer: &Pseudonymizer) -> Result<ParsedExport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = ParsedExport::default();
    let mut seen = HashSet::new();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.report.lines += 1;
        match parse_line(&line, base, pseudonymizer) {
            Ok((msg, pending)) => {
                if !seen.insert(msg.key()) {
                    tracing::warn!(file = %path.display(), line = lineno, key = %msg.key(), "duplicate message skipped");
                    out.report.duplicates.push(LineIssue {
                        line: lineno,
                        reason: format!("duplicate message {}", msg.key()),
                    });
                    continue;
                }
                out.media.extend(pending);
                out.messages.push(msg);
                out.report.parsed += 1;
            }
            Err(e) => {
                tracing::warn!(file = %path.display(), line = lineno, "invalid line skipped: {e}");
                out.report.invalid.push(LineIssue {
                    line: lineno,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

fn parse_line(
    line: &str,
    base: &Path,
    pseudonymizer: &Pseudonymizer,
) -> Result<(RawMessage, Option<PendingBlob>)> {
    let raw: ExportLine = serde_json::from_str(line)?;
    let sent_at = raw.validate()?;

    let pending = match (&raw.media_path, raw.media_kind) {
        (Some(rel), kind) if kind != MediaKind::Text => {
            let source = base.join(rel);
            let bytes = std::fs::read(&source).map_err(|e| Error::io(&source, e))?;
            Some(PendingBlob {
                blob: BlobRef {
                    checksum: checksum128(&bytes),
                    size_bytes: bytes.len() as u64,
                    media_kind: kind,
                },
                source,
            })
        }
        _ => None,
    };

    let msg = RawMessage {
        msg_id: raw.msg_id,
        chat_id: raw.chat_id,
        sender: pseudonymizer.pseudonymize(&raw.sender_id),
        sent_at,
        media_kind: raw.media_kind,
        text: raw.text,
        media_ref: pending.as_ref().map(|p| p.blob.clone()),
    };
    Ok((msg, pending))
}
