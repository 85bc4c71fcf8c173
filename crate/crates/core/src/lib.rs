//! Monitoring of public Telegram groups: ingest chat exports, fingerprint
//! every message, cluster near-duplicates, rank what spread the most and
//! serve the result over an authenticated HTTP API.
//!
//! The pipeline, in order:
//!
//! - [`ingest`]: parse JSONL exports into [`ingest::RawMessage`]s, with
//!   sender ids replaced by keyed pseudonyms before anything is stored.
//! - [`fingerprint`]: 64-bit DCT perceptual hashes for images, MD5 for other
//!   media, word-shingle sets for text.
//! - [`cluster`]: single-link grouping of near-duplicates.
//! - [`store`]: content-addressed blobs plus line-oriented tables.
//! - [`rank`]: per-period rankings, spread details, chat size and volume
//!   statistics.
//! - [`api`]: the read-only HTTP service.
//!
//! [`pipeline`] strings the batch stages together and [`fixture`] generates
//! synthetic corpora with known ground truth. See `examples/` for one
//! runnable program per stage.

pub mod api;
pub mod cluster;
pub mod config;
mod error;
pub mod fingerprint;
pub mod fixture;
pub mod ingest;
pub mod pipeline;
pub mod rank;
pub mod store;

pub use error::{Error, Result};
