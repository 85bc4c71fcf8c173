use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory as Gc};
use unicode_normalization::UnicodeNormalization;

const SHINGLE_LEN: usize = 3;

/// Word 3-gram shingles of a normalized message, or the token set when the
/// message has fewer than three tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShingleSet(BTreeSet<String>);

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn contains(&self, shingle: &str) -> bool {
        self.0.contains(shingle)
    }
}

impl FromIterator<String> for ShingleSet {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        ShingleSet(iter.into_iter().collect())
    }
}

fn is_stripped(c: char) -> bool {
    matches!(
        get_general_category(c),
        Gc::ConnectorPunctuation
            | Gc::DashPunctuation
            | Gc::OpenPunctuation
            | Gc::ClosePunctuation
            | Gc::InitialPunctuation
            | Gc::FinalPunctuation
            | Gc::OtherPunctuation
            | Gc::MathSymbol
            | Gc::CurrencySymbol
            | Gc::ModifierSymbol
            | Gc::OtherSymbol
    )
}

/// NFC, lowercase, drop punctuation and symbols (Unicode P* and S*),
/// collapse whitespace.
pub fn normalize_text(text: &str) -> String {
    let lowered = text.nfc().collect::<String>().to_lowercase();
    let stripped: String = lowered.chars().filter(|&c| !is_stripped(c)).collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Shingles of text that has already gone through [`normalize_text`].
pub fn shingles_of_normalized(normalized: &str) -> ShingleSet {
    let tokens: Vec<&str> = normalized.split(' ').filter(|t| !t.is_empty()).collect();
    if tokens.len() < SHINGLE_LEN {
        tokens.into_iter().map(str::to_owned).collect()
    } else {
        tokens.windows(SHINGLE_LEN).map(|w| w.join(" ")).collect()
    }
}

pub fn text_shingles(text: &str) -> ShingleSet {
    shingles_of_normalized(&normalize_text(text))
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counting as identical.
pub fn jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.0.iter().filter(|s| large.0.contains(*s)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
