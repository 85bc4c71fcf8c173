// Finds group invite links in free text, the way new groups are
// discovered from links posted elsewhere.
//
//     cargo run --example scan_invite_links

use std::collections::BTreeSet;

use telemonitor::ingest::extract_invite_links;

pub fn run() -> Vec<String> {
    let posts = [
        "Entrem no grupo! https://t.me/joinchat/BbXk2-Qp9zA",
        "backup: https://telegram.me/patriotas_br e https://t.me/joinchat/BbXk2-Qp9zA",
        "canal publico https://t.me/noticias (not an invite)",
    ];
    let mut seen = BTreeSet::new();
    let mut found = Vec::new();
    for post in posts {
        for link in extract_invite_links(post) {
            if seen.insert(link.url.clone()) {
                println!("{:<40} key={}", link.url, link.group_key);
                found.push(link.url);
            }
        }
    }
    found
}

fn main() {
    let links = run();
    println!("{} distinct invite links", links.len());
}
