// Text normalization and shingle overlap between reworded forwards.
//
//     cargo run --example text_similarity

use telemonitor::fingerprint::{jaccard, normalize_text, text_shingles};

pub fn run() -> Vec<f64> {
    let original = "URGENTE!!! A urna eletrônica foi fraudada, compartilhem antes que apaguem";
    let variants = [
        "urgente a urna eletrônica foi fraudada compartilhem antes que apaguem",
        "URGENTE!!! A urna eletrônica foi fraudada, compartilhem antes que apaguem 🇧🇷🇧🇷",
        "A urna eletrônica foi fraudada, compartilhem antes que apaguem o vídeo",
        "Bom dia grupo, hoje tem jogo do Flamengo",
    ];
    println!("normalized: {:?}", normalize_text(original));
    let base = text_shingles(original);
    variants
        .iter()
        .map(|v| {
            let j = jaccard(&base, &text_shingles(v));
            let verdict = if j >= 0.7 { "same content" } else { "different" };
            println!("{j:.3}  {verdict:<13} {v}");
            j
        })
        .collect()
}

fn main() {
    run();
}
