mod common;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use common::{files_under, pseudonymizer, SECRET};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telemonitor::fixture::{self, FixtureOptions};
use telemonitor::ingest::{extract_invite_links, parse_export, ExportLine, MediaKind, RawMessage};
use telemonitor::pipeline;
use telemonitor::store::BlobRef;

/// Distinct `(chat_id, msg_id)` keys in a JSONL file, found by parsing
/// each line as an untyped JSON object.
fn distinct_keys(jsonl: &str) -> BTreeSet<(String, String)> {
    jsonl
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["chat_id"].as_str().unwrap().to_string(), v["msg_id"].as_str().unwrap().to_string())
        })
        .collect()
}

#[test]
fn duplicated_lines_are_dropped() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut lines = Vec::new();
    for i in 0..997 {
        lines.push(format!(
            r#"{{"msg_id":"{i}","chat_id":"grupo","sender_id":"u{}","sent_at":"2021-03-0{}T10:00:{:02}Z","media_kind":"text","text":"mensagem {i}"}}"#,
            rng.gen_range(0..50),
            rng.gen_range(1..10),
            rng.gen_range(0..60),
        ));
    }
    for _ in 0..3 {
        let at = rng.gen_range(0..lines.len());
        let dup = lines[rng.gen_range(0..at.max(1))].clone();
        lines.insert(at, dup);
    }
    assert_eq!(lines.len(), 1000);
    let mut body = String::new();
    for l in &lines {
        writeln!(body, "{l}").unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grupo.jsonl");
    std::fs::write(&path, &body).unwrap();
    let parsed = parse_export(&path, &pseudonymizer()).unwrap();

    let oracle = distinct_keys(&body);
    assert_eq!(oracle.len(), 997);
    assert_eq!(parsed.messages.len(), oracle.len());
    assert_eq!(parsed.report.lines, 1000);
    assert_eq!(parsed.report.duplicates.len(), 3);
    assert!(parsed.report.invalid.is_empty());
    let got: BTreeSet<(String, String)> =
        parsed.messages.iter().map(|m| (m.chat_id.clone(), m.msg_id.clone())).collect();
    assert_eq!(got, oracle);
}

#[test]
fn bad_lines_are_reported_with_their_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let body = [
        r#"{"msg_id":"1","chat_id":"c","sender_id":"u","sent_at":"2021-03-01T10:00:00Z","media_kind":"text","text":"ok"}"#,
        r#"{"msg_id":"2","chat_id":"c","sender_id":"u","sent_at":"2021-03-01T10:00:00-03:00","media_kind":"text","text":"local"}"#,
        "not json",
        r#"{"msg_id":"4","chat_id":"c","sender_id":"u","sent_at":"2021-03-01T10:00:00Z","media_kind":"image","media_path":"missing.png"}"#,
        r#"{"msg_id":"5","chat_id":"c","sender_id":"u","sent_at":"2021-03-01T10:00:00Z","media_kind":"sticker"}"#,
    ]
    .join("\n");
    std::fs::write(&path, body).unwrap();
    let parsed = parse_export(&path, &pseudonymizer()).unwrap();
    assert_eq!(parsed.messages.len(), 1);
    let bad: Vec<usize> = parsed.report.invalid.iter().map(|i| i.line).collect();
    assert_eq!(bad, [2, 3, 4, 5]);
}

/// Counts invite links by walking the text once, without regular
/// expressions.
fn scan_links(text: &str) -> usize {
    const PREFIXES: [&str; 2] = ["https://t.me/joinchat/", "https://telegram.me/"];
    let bytes = text.as_bytes();
    let key_char = |b: u8| b.is_ascii_alphanumeric() || b == b'_' || b == b'-';
    let mut count = 0;
    let mut i = 0;
    while i < bytes.len() {
        let mut advanced = false;
        for p in PREFIXES {
            if bytes[i..].starts_with(p.as_bytes()) {
                let start = i + p.len();
                let mut end = start;
                while end < bytes.len() && key_char(bytes[end]) {
                    end += 1;
                }
                if end > start {
                    count += 1;
                    i = end;
                    advanced = true;
                }
                break;
            }
        }
        if !advanced {
            i += 1;
        }
    }
    count
}

fn link_soup() -> impl Strategy<Value = String> {
    let fragments = prop::sample::select(vec![
        "https://t.me/joinchat/",
        "https://telegram.me/",
        "https://t.me/",
        "http://t.me/joinchat/",
        "https://",
        "abc",
        "Z9",
        "_-",
        " ",
        "\n",
        ".",
        "/",
        "é",
        "urna",
    ]);
    prop::collection::vec(fragments, 0..40).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn link_count_matches_a_single_pass_scan(text in link_soup()) {
        let links = extract_invite_links(&text);
        prop_assert_eq!(links.len(), scan_links(&text));
        for l in &links {
            prop_assert!(text.contains(&l.url));
            prop_assert!(l.url.ends_with(&l.group_key));
        }
    }
}

fn arb_message() -> impl Strategy<Value = RawMessage> {
    (
        "[a-z0-9-]{1,12}",
        1u64..1_000_000,
        "[a-z0-9]{1,10}",
        0i64..200_000_000,
        prop::sample::select(MediaKind::ALL.to_vec()),
        "\\PC{0,40}",
        any::<[u8; 16]>(),
    )
        .prop_map(|(chat, id, sender, secs, kind, text, sum)| {
            let mut m = common::message(&chat, id, &sender, common::ts(secs), kind);
            if kind == MediaKind::Text {
                m.text = Some(text);
            } else {
                m.media_ref = Some(BlobRef {
                    checksum: telemonitor::fingerprint::Checksum128(sum),
                    size_bytes: 1,
                    media_kind: kind,
                });
            }
            m
        })
}

proptest! {
    #[test]
    fn messages_render_to_valid_export_lines(m in arb_message()) {
        prop_assert!(m.validate().is_ok());
        let line = serde_json::to_string(&m.to_export_line()).unwrap();
        prop_assert!(!line.contains('\n'));
        let object: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line).unwrap();
        let allowed = ["msg_id", "chat_id", "sender_id", "sent_at", "media_kind", "text", "media_path"];
        prop_assert!(object.keys().all(|k| allowed.contains(&k.as_str())));

        let back: ExportLine = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back.validate().unwrap(), m.sent_at);
        prop_assert_eq!(&back.msg_id, &m.msg_id);
        prop_assert_eq!(&back.chat_id, &m.chat_id);
        prop_assert_eq!(&back.sender_id, m.sender.as_str());
        prop_assert_eq!(back.media_kind, m.media_kind);
        prop_assert_eq!(&back.text, &m.text);
    }
}

#[test]
fn raw_sender_ids_never_reach_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    let dataset = dir.path().join("dataset");
    let manifest = fixture::generate(&input, &FixtureOptions::new(11, 1000)).unwrap();
    common::ingest_and_process(&input, &dataset);

    let needles: Vec<&[u8]> = manifest
        .sender_ids
        .iter()
        .map(|s| s.as_bytes())
        .chain([SECRET])
        .collect();
    assert!(!manifest.sender_ids.is_empty());
    let mut scanned = 0;
    for path in files_under(&dataset) {
        let bytes = std::fs::read(&path).unwrap();
        scanned += bytes.len();
        for n in &needles {
            assert!(
                !bytes.windows(n.len()).any(|w| w == *n),
                "{} contains {:?}",
                path.display(),
                String::from_utf8_lossy(n)
            );
        }
    }
    assert!(scanned > 0);
    let messages = std::fs::read_to_string(dataset.join("messages.jsonl")).unwrap();
    let p = pseudonymizer().pseudonymize(&manifest.sender_ids[0]);
    assert!(messages.contains(p.as_str()));
}

#[test]
fn reingesting_the_same_input_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    let dataset = dir.path().join("dataset");
    let manifest = fixture::generate(&input, &FixtureOptions::new(3, 600)).unwrap();

    let first = pipeline::ingest_dir(&input, &dataset, &pseudonymizer()).unwrap();
    assert_eq!(first.parsed, manifest.messages);
    assert_eq!(first.invalid, manifest.invalid_lines);
    assert_eq!(first.duplicates, manifest.duplicate_lines);
    let snapshot = |d: &std::path::Path| -> Vec<(std::path::PathBuf, Vec<u8>)> {
        files_under(d).into_iter().map(|p| (p.clone(), std::fs::read(p).unwrap())).collect()
    };
    let before = snapshot(&dataset);

    let second = pipeline::ingest_dir(&input, &dataset, &pseudonymizer()).unwrap();
    assert_eq!(second.messages_total, first.messages_total);
    assert_eq!(second.blobs_stored, 0);
    assert_eq!(snapshot(&dataset), before);
}
