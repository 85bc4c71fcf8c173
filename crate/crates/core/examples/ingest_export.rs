// Parses a chat export (JSON Lines plus a media folder). Sender ids are
// pseudonymized on the way in; bad and repeated lines are reported.
//
//     cargo run --example ingest_export

use telemonitor::fixture::{encode_png, synth_image};
use telemonitor::ingest::{parse_export, Pseudonymizer};

pub fn run() -> telemonitor::Result<usize> {
    let dir = tempfile::tempdir().map_err(|e| telemonitor::Error::Config(e.to_string()))?;
    std::fs::create_dir_all(dir.path().join("media")).unwrap();
    std::fs::write(dir.path().join("media/meme.png"), encode_png(&synth_image(1))?).unwrap();

    let export = dir.path().join("grupo-001.jsonl");
    std::fs::write(
        &export,
        r#"{"msg_id":"1","chat_id":"grupo-001","sender_id":"5511999990000","sent_at":"2021-03-01T12:00:00Z","media_kind":"text","text":"Bom dia a todos"}
{"msg_id":"2","chat_id":"grupo-001","sender_id":"5511999990001","sent_at":"2021-03-01T12:05:10Z","media_kind":"image","media_path":"media/meme.png"}
{"msg_id":"2","chat_id":"grupo-001","sender_id":"5511999990001","sent_at":"2021-03-01T12:05:10Z","media_kind":"image","media_path":"media/meme.png"}
{"msg_id":"3","chat_id":"grupo-001","sender_id":"5511999990002","sent_at":"2021-03-01T09:00:00-03:00","media_kind":"text","text":"local time"}
"#,
    )
    .unwrap();

    let pseudonymizer = Pseudonymizer::new(b"operator secret")?;
    let parsed = parse_export(&export, &pseudonymizer)?;
    for m in &parsed.messages {
        println!("{} {} {} by {}", m.key(), m.sent_at, m.media_kind, m.sender);
    }
    for blob in &parsed.media {
        println!("media {} ({} bytes) from {}", blob.blob.checksum, blob.blob.size_bytes, blob.source.display());
    }
    for issue in parsed.report.invalid.iter().chain(&parsed.report.duplicates) {
        println!("skipped line {}: {}", issue.line, issue.reason);
    }
    Ok(parsed.messages.len())
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}
