use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

/// An invite URL in one of the two recognised forms:
/// `https://t.me/joinchat/<key>` or `https://telegram.me/<key>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct InviteLink {
    pub url: String,
    /// The `<key>` path segment, a run of `[A-Za-z0-9_-]`.
    pub group_key: String,
}

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"https://(?:t\.me/joinchat|telegram\.me)/([A-Za-z0-9_-]+)").expect("static regex")
    })
}

/// All invite links in `text`, in order of appearance, duplicates kept.
pub fn extract_invite_links(text: &str) -> Vec<InviteLink> {
    pattern()
        .captures_iter(text)
        .map(|c| InviteLink {
            url: c[0].to_string(),
            group_key: c[1].to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joinchat_link() {
        let links = extract_invite_links("join https://t.me/joinchat/AbC-12 now");
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].group_key, "AbC-12");
        assert_eq!(links[0].url, "https://t.me/joinchat/AbC-12");
    }

    #[test]
    fn telegram_me_link_and_boundaries() {
        let links = extract_invite_links("(https://telegram.me/grupo_br), https://t.me/joinchat/x.y");
        let keys: Vec<_> = links.iter().map(|l| l.group_key.as_str()).collect();
        assert_eq!(keys, ["grupo_br", "x"]);
    }

    #[test]
    fn non_matching_forms() {
        assert!(extract_invite_links("no links here").is_empty());
        assert!(extract_invite_links("").is_empty());
        assert!(extract_invite_links("http://t.me/joinchat/abc").is_empty());
        assert!(extract_invite_links("https://t.me/joinchat/").is_empty());
        assert!(extract_invite_links("https://t.me/publicname").is_empty());
    }

    #[test]
    fn duplicates_are_kept() {
        let l = extract_invite_links("https://t.me/joinchat/Q1 and again https://t.me/joinchat/Q1");
        assert_eq!(l.len(), 2);
        assert_eq!(l[0], l[1]);
    }
}
