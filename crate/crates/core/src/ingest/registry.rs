use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Platform cap on group membership. Channels are unbounded.
pub const GROUP_MEMBER_CAP: u64 = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatKind {
    Group,
    Channel,
}

/// A monitored group or channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub chat_id: String,
    pub kind: ChatKind,
    pub title: String,
    /// Members for groups, subscribers for channels.
    pub member_count: u64,
    #[serde(with = "super::utc_seconds")]
    pub joined_at: DateTime<Utc>,
}

impl ChatRecord {
    pub fn validate(&self) -> Result<()> {
        if self.chat_id.is_empty() {
            return Err(Error::Rejected("empty chat_id".into()));
        }
        if self.kind == ChatKind::Group && self.member_count > GROUP_MEMBER_CAP {
            return Err(Error::Rejected(format!(
                "group {} has {} members, above the {GROUP_MEMBER_CAP} cap",
                self.chat_id, self.member_count
            )));
        }
        Ok(())
    }
}

/// Monitored chats keyed by `chat_id`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    chats: BTreeMap<String, ChatRecord>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the record with the same `chat_id`.
    pub fn register(&mut self, record: ChatRecord) -> Result<()> {
        record.validate()?;
        self.chats.insert(record.chat_id.clone(), record);
        Ok(())
    }

    pub fn get(&self, chat_id: &str) -> Option<&ChatRecord> {
        self.chats.get(chat_id)
    }

    /// Display title, falling back to the id for unregistered chats.
    pub fn title<'a>(&'a self, chat_id: &'a str) -> &'a str {
        self.get(chat_id).map_or(chat_id, |c| c.title.as_str())
    }

    pub fn len(&self) -> usize {
        self.chats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chats.is_empty()
    }

    /// Records in `chat_id` order.
    pub fn iter(&self) -> impl Iterator<Item = &ChatRecord> {
        self.chats.values()
    }

    pub fn from_records(records: impl IntoIterator<Item = ChatRecord>) -> Result<Self> {
        let mut reg = Registry::new();
        for r in records {
            reg.register(r)?;
        }
        Ok(reg)
    }

    /// Reads a JSON array of chat records.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let records: Vec<ChatRecord> = serde_json::from_slice(bytes)?;
        Self::from_records(records)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let records: Vec<&ChatRecord> = self.iter().collect();
        let mut out = serde_json::to_vec_pretty(&records).expect("chat records serialize");
        out.push(b'\n');
        out
    }
}

/// Functional form of [`Registry::register`].
pub fn register_chat(record: ChatRecord, mut registry: Registry) -> Result<Registry> {
    registry.register(record)?;
    Ok(registry)
}
