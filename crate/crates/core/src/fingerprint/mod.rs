//! Content identities: perceptual hashes for images, MD5 checksums for
//! other media and shingle sets for text.

mod phash;
mod text;

use std::fmt;
use std::str::FromStr;

use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use crate::ingest::{MediaKind, RawMessage};
use crate::{Error, Result};

pub use phash::{hamming, phash64, phash64_bytes, phash64_luma, resize_bilinear, PHash64};
pub use text::{jaccard, normalize_text, shingles_of_normalized, text_shingles, ShingleSet};

/// MD5 digest of a payload.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Checksum128(pub [u8; 16]);

impl Checksum128 {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Checksum128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Checksum128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Checksum128({self})")
    }
}

impl FromStr for Checksum128 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 32 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(Error::Rejected(format!("{s:?} is not a 32-digit lowercase hex checksum")));
        }
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out).map_err(|e| Error::Rejected(format!("{s:?}: {e}")))?;
        Ok(Checksum128(out))
    }
}

impl TryFrom<String> for Checksum128 {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Checksum128> for String {
    fn from(c: Checksum128) -> String {
        c.to_hex()
    }
}

pub fn checksum128(payload: &[u8]) -> Checksum128 {
    Checksum128(Md5::digest(payload).into())
}

/// Text identity: normalized form plus its shingles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextPrint {
    pub normalized: String,
    pub shingles: ShingleSet,
}

impl TextPrint {
    pub fn new(text: &str) -> Self {
        let normalized = normalize_text(text);
        let shingles = shingles_of_normalized(&normalized);
        TextPrint {
            normalized,
            shingles,
        }
    }

    /// Content key used in hex form: MD5 of the normalized text.
    pub fn digest(&self) -> Checksum128 {
        checksum128(self.normalized.as_bytes())
    }
}

/// Kind-tagged content identity of one message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fingerprint {
    Image(PHash64),
    Checksum(Checksum128),
    Text(TextPrint),
}

impl Fingerprint {
    /// Fixed-width lowercase hex, as persisted and served.
    pub fn hex(&self) -> String {
        match self {
            Fingerprint::Image(h) => h.to_string(),
            Fingerprint::Checksum(c) => c.to_hex(),
            Fingerprint::Text(t) => t.digest().to_hex(),
        }
    }
}

/// Computes the fingerprint of a message. `load_payload` is only called for
/// images; other media use the checksum already on their blob reference.
///
/// The error string says why the message cannot take part in clustering.
pub fn fingerprint_message<F>(msg: &RawMessage, load_payload: F) -> Result<Fingerprint, String>
where
    F: FnOnce(&crate::store::BlobRef) -> Result<Vec<u8>>,
{
    match msg.media_kind {
        MediaKind::Text => {
            let print = TextPrint::new(msg.text.as_deref().unwrap_or_default());
            if print.shingles.is_empty() {
                return Err("text is empty after normalization".into());
            }
            Ok(Fingerprint::Text(print))
        }
        MediaKind::Image => {
            let blob = msg.media_ref.as_ref().ok_or("image without media reference")?;
            let payload = load_payload(blob).map_err(|e| e.to_string())?;
            phash64_bytes(&payload).map(Fingerprint::Image).map_err(|e| e.to_string())
        }
        MediaKind::Video | MediaKind::Audio | MediaKind::Document => msg
            .media_ref
            .as_ref()
            .map(|b| Fingerprint::Checksum(b.checksum))
            .ok_or_else(|| format!("{} without media reference", msg.media_kind)),
    }
}
