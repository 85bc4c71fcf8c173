// Groups near-duplicate messages from several chats and reports how far
// each piece of content spread.
//
//     cargo run --example cluster_duplicates

use chrono::{Duration, TimeZone, Utc};
use telemonitor::cluster::{build_clusters, FingerprintedMessage, Thresholds};
use telemonitor::fingerprint::{fingerprint_message, TextPrint};
use telemonitor::ingest::{MediaKind, Pseudonymizer, RawMessage};

pub fn run() -> telemonitor::Result<usize> {
    let names = Pseudonymizer::new(b"example")?;
    let start = Utc.with_ymd_and_hms(2021, 3, 1, 9, 0, 0).unwrap();
    let posts = [
        ("grupo-a", "ana", 0, "Vejam o vídeo que a mídia esconde sobre a votação de ontem no senado"),
        ("grupo-b", "bia", 40, "VEJAM o vídeo que a mídia esconde sobre a votação de ontem no senado!!"),
        ("grupo-c", "caio", 95, "vejam o vídeo que a mídia esconde sobre a votação de ontem no senado 📢"),
        ("grupo-b", "duda", 200, "Bom dia"),
        ("grupo-c", "eva", 210, "bom dia!"),
        ("grupo-a", "fabio", 300, "Alguém sabe o resultado do jogo?"),
    ];
    let messages: Vec<RawMessage> = posts
        .iter()
        .enumerate()
        .map(|(i, (chat, who, minutes, text))| RawMessage {
            msg_id: (i + 1).to_string(),
            chat_id: chat.to_string(),
            sender: names.pseudonymize(who),
            sent_at: start + Duration::minutes(*minutes),
            media_kind: MediaKind::Text,
            text: Some(text.to_string()),
            media_ref: None,
        })
        .collect();

    let items: Vec<FingerprintedMessage> = messages
        .iter()
        .map(|m| FingerprintedMessage {
            message: m,
            fingerprint: fingerprint_message(m, |_| unreachable!("text needs no payload")).unwrap(),
        })
        .collect();
    let clusters = build_clusters(&items, &Thresholds::default());
    for c in &clusters {
        println!(
            "{}  shares={} groups={} senders={} first={}",
            c.cluster_id, c.share_count, c.distinct_groups, c.distinct_senders, c.first_seen
        );
    }
    println!("normalized form: {:?}", TextPrint::new(posts[1].3).normalized);
    Ok(clusters.len())
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}
