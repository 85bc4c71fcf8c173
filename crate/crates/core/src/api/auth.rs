use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use pbkdf2::pbkdf2_hmac;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::{Error, Result};

pub const DEFAULT_PBKDF2_ROUNDS: u32 = 100_000;
const SALT_LEN: usize = 16;
const KEY_LEN: usize = 32;

/// An analyst login. Only a salted PBKDF2-HMAC-SHA256 digest of the
/// password is kept, encoded as `pbkdf2-sha256$<rounds>$<salt hex>$<key hex>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub username: String,
    pub password_digest: String,
    #[serde(with = "crate::ingest::utc_seconds")]
    pub created_at: DateTime<Utc>,
}

impl Account {
    pub fn new(username: &str, password: &str) -> Result<Self> {
        Self::with_rounds(username, password, DEFAULT_PBKDF2_ROUNDS)
    }

    pub fn with_rounds(username: &str, password: &str, rounds: u32) -> Result<Self> {
        if username.is_empty() || password.is_empty() {
            return Err(Error::Rejected("username and password must be non-empty".into()));
        }
        let mut salt = [0u8; SALT_LEN];
        rand::thread_rng().fill_bytes(&mut salt);
        Ok(Account {
            username: username.into(),
            password_digest: encode_digest(password, &salt, rounds.max(1)),
            created_at: Utc::now(),
        })
    }

    /// Constant-time check of `password` against the stored digest.
    pub fn verify(&self, password: &str) -> bool {
        verify_digest(&self.password_digest, password)
    }
}

fn derive(password: &str, salt: &[u8], rounds: u32) -> [u8; KEY_LEN] {
    let mut key = [0u8; KEY_LEN];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, rounds, &mut key);
    key
}

fn encode_digest(password: &str, salt: &[u8], rounds: u32) -> String {
    let key = derive(password, salt, rounds);
    format!("pbkdf2-sha256${rounds}${}${}", hex::encode(salt), hex::encode(key))
}

fn verify_digest(digest: &str, password: &str) -> bool {
    let parts: Vec<&str> = digest.split('$').collect();
    let [scheme, rounds, salt, key] = parts.as_slice() else {
        return false;
    };
    let (Ok(rounds), Ok(salt), Ok(key)) = (rounds.parse::<u32>(), hex::decode(salt), hex::decode(key)) else {
        return false;
    };
    if *scheme != "pbkdf2-sha256" || rounds == 0 || key.len() != KEY_LEN {
        return false;
    }
    derive(password, &salt, rounds).ct_eq(key.as_slice()).into()
}

/// Accounts loaded from a JSON array file.
#[derive(Clone, Debug, Default)]
pub struct Accounts {
    by_name: HashMap<String, Account>,
    /// Digest checked for unknown usernames so they cost as much as a
    /// wrong password.
    decoy: String,
}

impl Accounts {
    pub fn new(accounts: impl IntoIterator<Item = Account>) -> Result<Self> {
        let mut by_name = HashMap::new();
        let mut rounds = DEFAULT_PBKDF2_ROUNDS;
        for a in accounts {
            if let Some(r) = a.password_digest.split('$').nth(1).and_then(|r| r.parse().ok()) {
                rounds = r;
            }
            if by_name.insert(a.username.clone(), a).is_some() {
                return Err(Error::Config("duplicate username in accounts".into()));
            }
        }
        Ok(Accounts {
            by_name,
            decoy: encode_digest("decoy", &[0u8; SALT_LEN], rounds),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let list: Vec<Account> = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::new(list)
    }

    pub fn authenticate(&self, username: &str, password: &str) -> bool {
        match self.by_name.get(username) {
            Some(a) => a.verify(password),
            None => {
                let _ = verify_digest(&self.decoy, password);
                false
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenError {
    Missing,
    Invalid,
    Expired,
}

#[derive(Clone, Debug)]
struct Session {
    expires_at: DateTime<Utc>,
}

/// Issued bearer tokens, held in memory.
#[derive(Debug)]
pub struct Sessions {
    ttl: Duration,
    tokens: Mutex<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(ttl: std::time::Duration) -> Self {
        Sessions {
            ttl: Duration::from_std(ttl).unwrap_or(Duration::MAX),
            tokens: Mutex::new(HashMap::new()),
        }
    }

    /// Issues a fresh 256-bit token.
    pub fn issue(&self, now: DateTime<Utc>) -> (String, DateTime<Utc>) {
        let mut raw = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut raw);
        let token = hex::encode(raw);
        let expires_at = now.checked_add_signed(self.ttl).unwrap_or(DateTime::<Utc>::MAX_UTC);
        self.tokens
            .lock()
            .expect("session lock")
            .insert(token.clone(), Session { expires_at });
        (token, expires_at)
    }

    pub fn check(&self, token: &str, now: DateTime<Utc>) -> Result<(), TokenError> {
        let mut tokens = self.tokens.lock().expect("session lock");
        match tokens.get(token) {
            None => Err(TokenError::Invalid),
            Some(s) if now >= s.expires_at => {
                tokens.remove(token);
                Err(TokenError::Expired)
            }
            Some(_) => Ok(()),
        }
    }
}
