//! Deterministic synthetic corpora with planted duplicates.
//!
//! [`generate`] writes an input directory that `monitor ingest` accepts:
//!
//! ```text
//! <out>/registry.json
//! <out>/manifest.json          ground truth, see [`Manifest`]
//! <out>/exports/<chat>.jsonl
//! <out>/exports/media/...
//! ```
//!
//! Planted content per 10 000 messages: 200 image originals, each posted
//! once and re-posted 3 to 10 more times as an exact copy, a JPEG quality 75
//! recompression, an 80% bilinear downscale, or both; unique images;
//! repeated video, audio and document payloads; text messages re-posted
//! with surface edits or one extra word; short stock phrases; and unique
//! texts. A few malformed and duplicated lines are mixed in.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use image::codecs::jpeg::JpegEncoder;
use image::imageops::FilterType;
use image::{ImageFormat, Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{utc_seconds, ChatKind, ChatRecord, ExportLine, MediaKind, Registry};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Ground truth of a generated corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Valid, distinct messages written.
    pub messages: usize,
    pub invalid_lines: usize,
    pub duplicate_lines: usize,
    /// Number of distinct planted contents per kind.
    pub expected_clusters: BTreeMap<MediaKind, usize>,
    /// Raw sender identifiers used in the exports.
    pub sender_ids: Vec<String>,
    pub truth: Vec<TruthEntry>,
}

/// Which planted content a message carries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub chat_id: String,
    pub msg_id: String,
    pub kind: MediaKind,
    pub content: String,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[derive(Clone, Debug)]
pub struct FixtureOptions {
    pub seed: u64,
    pub messages: usize,
    pub first_day: NaiveDate,
    pub days: u32,
    pub chats: usize,
}

impl FixtureOptions {
    pub fn new(seed: u64, messages: usize) -> Self {
        FixtureOptions {
            seed,
            messages,
            first_day: NaiveDate::from_ymd_opt(2021, 2, 15).expect("valid date"),
            days: 35,
            chats: 24,
        }
    }
}

const WORDS: &[&str] = &[
    "governo", "presidente", "eleição", "urna", "voto", "fraude", "brasil", "povo", "congresso", "senado",
    "ministro", "supremo", "tribunal", "decisão", "vacina", "pandemia", "economia", "imposto", "reforma",
    "partido", "deputado", "senador", "campanha", "pesquisa", "mídia", "verdade", "mentira", "notícia",
    "vídeo", "áudio", "imagem", "grupo", "canal", "compartilhe", "urgente", "atenção", "hoje", "amanhã",
    "ontem", "semana", "mês", "ano", "país", "estado", "cidade", "prefeito", "governador", "polícia",
    "justiça", "lei", "projeto", "votação", "aprovado", "rejeitado", "escândalo", "dinheiro", "corrupção",
    "investigação", "operação", "prisão", "liberdade", "democracia", "constituição", "direito", "dever",
    "cidadão", "família", "escola", "saúde", "hospital", "médico", "emprego", "salário", "preço",
    "gasolina", "comida", "mercado", "dólar", "real", "banco", "crise", "manifestação", "rua", "protesto",
    "apoio", "contra", "favor", "nunca", "sempre", "agora", "depois", "antes", "muito", "pouco", "grande",
    "pequeno", "novo", "velho", "primeiro", "último", "todos", "ninguém", "alguém", "nosso", "deles",
    "quer", "vai", "pode", "deve", "fez", "disse", "mostra", "prova", "revela", "esconde", "denuncia",
    "confirma", "nega", "explica", "entenda", "veja", "assista", "leia", "ouça", "saiba", "descubra",
    "oficial", "secreto", "exclusivo", "importante", "grave", "absurdo", "inacreditável", "chocante",
    "histórico", "militar", "exército", "forças", "armadas", "general", "capitão", "ministério",
    "educação", "ciência", "pesquisador", "universidade", "professor", "aluno", "jornal", "jornalista",
    "repórter", "televisão", "rádio", "internet", "rede", "social", "aplicativo", "mensagem", "telefone",
    "número", "lista", "nome", "data", "hora", "dia", "noite", "manhã", "tarde", "norte", "sul", "leste",
    "oeste", "nordeste", "centro", "região", "capital", "interior", "campo", "indústria", "agro",
    "produtor", "trabalhador", "empresa", "empresário", "sindicato", "greve", "caminhoneiro", "estrada",
    "ponte", "obra", "contrato", "licitação", "recurso", "verba", "orçamento", "dívida", "juros", "taxa",
];

const STOCK_PHRASES: &[&[&str]] = &[
    &["Bom dia!", "bom dia", "BOM DIA 🇧🇷", "Bom dia, "],
    &["Boa noite", "boa noite!!", "Boa noite 🙏"],
    &["kkkkk", "KKKKK", "kkkkk 😂"],
    &["Verdade!", "verdade", "VERDADE!!!"],
    &["Fake news", "fake news!", "FAKE NEWS"],
    &["Compartilhem!", "compartilhem", "COMPARTILHEM 📢"],
    &["Acorda Brasil", "acorda brasil!", "ACORDA BRASIL 🇧🇷🇧🇷"],
    &["Amém", "amém 🙏", "AMÉM!"],
];

enum Payload {
    Image(ImageVariant),
    Bytes(usize),
    Text(String),
}

#[derive(Clone, Copy)]
enum ImageVariant {
    Original(usize),
    Recompressed(usize),
    Downscaled(usize),
    DownscaledRecompressed(usize),
    Single(usize),
}

struct Post {
    kind: MediaKind,
    content: String,
    payload: Payload,
    /// Index of the content group, used to keep re-posts close in time.
    group: usize,
}

/// Writes a corpus under `out` and returns its manifest.
pub fn generate(out: &Path, opts: &FixtureOptions) -> Result<Manifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let exports = out.join("exports");
    let media_dir = exports.join("media");
    fs::create_dir_all(&media_dir).map_err(|e| Error::io(&media_dir, e))?;

    let total = opts.messages;
    let mut posts: Vec<Post> = Vec::with_capacity(total + 16);
    let mut group = 0usize;

    let image_originals = (total / 50).max(usize::from(total >= 5));
    for o in 0..image_originals {
        let reposts = rng.gen_range(3..=10);
        posts.push(image_post(ImageVariant::Original(o), o, group));
        for _ in 0..reposts {
            let v = match rng.gen_range(0..4) {
                0 => ImageVariant::Original(o),
                1 => ImageVariant::Recompressed(o),
                2 => ImageVariant::Downscaled(o),
                _ => ImageVariant::DownscaledRecompressed(o),
            };
            posts.push(image_post(v, o, group));
        }
        group += 1;
    }
    for s in 0..total * 3 / 100 {
        posts.push(Post {
            kind: MediaKind::Image,
            content: format!("image-single-{s:04}"),
            payload: Payload::Image(ImageVariant::Single(s)),
            group,
        });
        group += 1;
    }

    let media_budget = posts.len() + total / 10;
    let mut blob_id = 0;
    while posts.len() < media_budget {
        let kind = *[MediaKind::Video, MediaKind::Video, MediaKind::Audio, MediaKind::Audio, MediaKind::Document]
            .choose(&mut rng)
            .expect("non-empty");
        let copies = rng.gen_range(1..=5);
        for _ in 0..copies {
            posts.push(Post {
                kind,
                content: format!("{kind}-{blob_id:04}"),
                payload: Payload::Bytes(blob_id),
                group,
            });
        }
        blob_id += 1;
        group += 1;
    }

    let text_budget = posts.len() + total / 4;
    let mut text_id = 0;
    while posts.len() < text_budget {
        let base = random_sentence(&mut rng, 8..=18);
        let copies = rng.gen_range(2..=8);
        for c in 0..copies {
            let text = if c == 0 { base.clone() } else { text_variant(&mut rng, &base) };
            posts.push(text_post(format!("text-planted-{text_id:04}"), text, group));
        }
        text_id += 1;
        group += 1;
    }

    let phrase_budget = posts.len() + total / 20;
    while posts.len() < phrase_budget {
        let p = rng.gen_range(0..STOCK_PHRASES.len());
        let surface = STOCK_PHRASES[p].choose(&mut rng).expect("non-empty");
        posts.push(text_post(format!("text-phrase-{p:02}"), surface.to_string(), group));
        group += 1;
    }

    let mut unique = 0;
    while posts.len() < total {
        let text = random_sentence(&mut rng, 6..=20);
        posts.push(text_post(format!("text-unique-{unique:05}"), text, group));
        unique += 1;
        group += 1;
    }
    posts.truncate(total);

    // Chats and senders.
    let n_chats = opts.chats.max(1);
    let registry = synthetic_registry(&mut rng, n_chats, opts.first_day);
    let n_senders = (total / 30).max(5);
    let sender_ids: Vec<String> = (0..n_senders)
        .map(|_| format!("tg-user-{:09}", rng.gen_range(100_000_000u64..1_000_000_000)))
        .collect();

    // Timestamps: a group's first post lands anywhere in the window, later
    // posts of the same group follow within four days.
    let window_start = Utc.from_utc_datetime(&opts.first_day.and_hms_opt(0, 0, 0).expect("midnight"));
    let window_secs = i64::from(opts.days) * 86_400;
    let mut group_start: BTreeMap<usize, i64> = BTreeMap::new();
    let chat_ids: Vec<String> = registry.iter().map(|c| c.chat_id.clone()).collect();

    struct Placed {
        chat: usize,
        sender: usize,
        at: DateTime<Utc>,
        post: usize,
    }
    let mut placed: Vec<Placed> = Vec::with_capacity(posts.len());
    for (i, post) in posts.iter().enumerate() {
        let secs = match group_start.get(&post.group) {
            Some(&start) => (start + rng.gen_range(0..4 * 86_400)).min(window_secs - 1),
            None => {
                let start = rng.gen_range(0..window_secs);
                group_start.insert(post.group, start);
                start
            }
        };
        placed.push(Placed {
            chat: rng.gen_range(0..n_chats),
            sender: rng.gen_range(0..n_senders),
            at: window_start + Duration::seconds(secs),
            post: i,
        });
    }
    placed.sort_by_key(|p| (p.chat, p.at, p.post));

    // Media payloads are rendered once per distinct file name.
    let mut originals: BTreeMap<usize, RgbImage> = BTreeMap::new();
    let mut written: BTreeMap<String, ()> = BTreeMap::new();
    let mut lines_by_chat: Vec<Vec<String>> = vec![Vec::new(); n_chats];
    let mut truth = Vec::with_capacity(posts.len());
    let mut seq = vec![0usize; n_chats];

    for p in &placed {
        let post = &posts[p.post];
        seq[p.chat] += 1;
        let chat_id = &chat_ids[p.chat];
        let msg_id = seq[p.chat].to_string();
        let (text, media_path) = match &post.payload {
            Payload::Text(t) => (Some(t.clone()), None),
            Payload::Bytes(id) => {
                let ext = match post.kind {
                    MediaKind::Video => "mp4",
                    MediaKind::Audio => "ogg",
                    _ => "pdf",
                };
                let name = format!("{}-{id:04}.{ext}", post.kind);
                if written.insert(name.clone(), ()).is_none() {
                    let bytes = pseudo_payload(opts.seed, *id, post.kind);
                    write_file(&media_dir.join(&name), &bytes)?;
                }
                let caption = rng.gen_bool(0.2).then(|| random_sentence(&mut rng, 3..=8));
                (caption, Some(format!("media/{name}")))
            }
            Payload::Image(v) => {
                let (name, bytes) = render_variant(opts.seed, *v, &mut originals)?;
                if written.insert(name.clone(), ()).is_none() {
                    write_file(&media_dir.join(&name), &bytes)?;
                }
                (None, Some(format!("media/{name}")))
            }
        };
        let line = ExportLine {
            msg_id: msg_id.clone(),
            chat_id: chat_id.clone(),
            sender_id: sender_ids[p.sender].clone(),
            sent_at: utc_seconds::format(&p.at),
            media_kind: post.kind,
            text,
            media_path,
        };
        lines_by_chat[p.chat].push(serde_json::to_string(&line)?);
        truth.push(TruthEntry {
            chat_id: chat_id.clone(),
            msg_id,
            kind: post.kind,
            content: post.content.clone(),
        });
    }

    // Dirty lines: malformed records and verbatim repeats.
    let invalid_lines = total / 500 + 1;
    let duplicate_lines = if total > 0 { total / 1000 + 1 } else { 0 };
    for i in 0..invalid_lines {
        let c = rng.gen_range(0..n_chats);
        let bad = match i % 3 {
            0 => format!(r#"{{"msg_id":"bad-{i}","chat_id":"{}","sender_id":"{}","media_kind":"text","text":"sem data"}}"#, chat_ids[c], sender_ids[0]),
            1 => format!(r#"{{"msg_id":"bad-{i}","chat_id":"{}","sender_id":"{}","sent_at":"2021-03-01T07:00:00-03:00","media_kind":"text","text":"hora local"}}"#, chat_ids[c], sender_ids[0]),
            _ => format!(r#"{{"msg_id":"bad-{i}","chat_id":"{}","sender_id":"{}","sent_at":"2021-03-01T10:00:00Z","media_kind":"image"}}"#, chat_ids[c], sender_ids[0]),
        };
        let at = rng.gen_range(0..=lines_by_chat[c].len());
        lines_by_chat[c].insert(at, bad);
    }
    for _ in 0..duplicate_lines {
        let candidates: Vec<usize> = (0..n_chats).filter(|&c| !lines_by_chat[c].is_empty()).collect();
        let c = candidates[rng.gen_range(0..candidates.len())];
        let valid: Vec<String> = lines_by_chat[c]
            .iter()
            .filter(|l| !l.contains("\"bad-"))
            .cloned()
            .collect();
        let dup = valid[rng.gen_range(0..valid.len())].clone();
        lines_by_chat[c].push(dup);
    }

    for (c, lines) in lines_by_chat.iter().enumerate() {
        let mut body = String::new();
        for l in lines {
            writeln!(body, "{l}").expect("write to string");
        }
        write_file(&exports.join(format!("{}.jsonl", chat_ids[c])), body.as_bytes())?;
    }
    write_file(&out.join("registry.json"), &registry.to_json())?;

    let mut expected: BTreeMap<MediaKind, std::collections::BTreeSet<&str>> = BTreeMap::new();
    for t in &truth {
        expected.entry(t.kind).or_default().insert(&t.content);
    }
    let expected_clusters = expected.into_iter().map(|(k, v)| (k, v.len())).collect();
    truth.sort_by(|a, b| (&a.chat_id, a.msg_id.parse::<u64>().ok()).cmp(&(&b.chat_id, b.msg_id.parse::<u64>().ok())));
    let manifest = Manifest {
        seed: opts.seed,
        messages: truth.len(),
        invalid_lines,
        duplicate_lines,
        expected_clusters,
        sender_ids,
        truth,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_file(&out.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

fn image_post(v: ImageVariant, original: usize, group: usize) -> Post {
    Post {
        kind: MediaKind::Image,
        content: format!("image-original-{original:04}"),
        payload: Payload::Image(v),
        group,
    }
}

fn text_post(content: String, text: String, group: usize) -> Post {
    Post {
        kind: MediaKind::Text,
        content,
        payload: Payload::Text(text),
        group,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn random_sentence(rng: &mut impl Rng, len: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.gen_range(len);
    let mut words: Vec<String> = (0..n).map(|_| WORDS.choose(rng).expect("non-empty").to_string()).collect();
    if let Some(first) = words.first_mut() {
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            *first = c.to_uppercase().chain(chars).collect();
        }
    }
    let mut s = words.join(" ");
    s.push_str([".", "!", "!!", "?", ""].choose(rng).expect("non-empty"));
    s
}

/// A re-post of `base` that stays within Jaccard 0.7 of it.
fn text_variant(rng: &mut impl Rng, base: &str) -> String {
    match rng.gen_range(0..4) {
        0 => base.to_uppercase(),
        1 => format!("{base} {}", WORDS.choose(rng).expect("non-empty")),
        2 => format!("🚨 URGENTE: {base}"),
        _ => format!("{} 👇👇", base.trim_end_matches(['.', '!', '?'])),
    }
}

fn pseudo_payload(seed: u64, id: usize, kind: MediaKind) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ kind as u64);
    let len = rng.gen_range(512..4096);
    let mut bytes = vec![0u8; len];
    rng.fill(bytes.as_mut_slice());
    bytes
}

/// A random picture built from the 8x8 lowest cosine modes with random
/// signs, tinted with a random colour. Distinct seeds give unrelated
/// perceptual hashes, and the pattern survives rescaling and JPEG.
pub fn synth_image(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(96..=160u32);
    let h = rng.gen_range(72..=128u32);
    let mut modes = [[0.0f64; 8]; 8];
    for (i, row) in modes.iter_mut().enumerate() {
        for (j, m) in row.iter_mut().enumerate() {
            if i + j > 0 {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                *m = sign * rng.gen_range(4.0..9.0);
            }
        }
    }
    let base: [f64; 3] = std::array::from_fn(|_| rng.gen_range(90.0..165.0));
    let tint: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.6..1.4));
    let cx: Vec<[f64; 8]> = (0..w)
        .map(|x| std::array::from_fn(|i| (std::f64::consts::PI * i as f64 * (x as f64 + 0.5) / w as f64).cos()))
        .collect();
    let cy: Vec<[f64; 8]> = (0..h)
        .map(|y| std::array::from_fn(|j| (std::f64::consts::PI * j as f64 * (y as f64 + 0.5) / h as f64).cos()))
        .collect();

    RgbImage::from_fn(w, h, |x, y| {
        let mut l = 0.0;
        for (i, row) in modes.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                l += m * cx[x as usize][j] * cy[y as usize][i];
            }
        }
        Rgb(std::array::from_fn(|c| (base[c] + tint[c] * l).round().clamp(0.0, 255.0) as u8))
    })
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Rejected(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

pub fn encode_jpeg(img: &RgbImage, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, quality)
        .encode_image(img)
        .map_err(|e| Error::Rejected(format!("jpeg encode: {e}")))?;
    Ok(out)
}

/// Bilinear downscale to 80% of each dimension.
pub fn downscale_80(img: &RgbImage) -> RgbImage {
    let w = (img.width() * 4 / 5).max(1);
    let h = (img.height() * 4 / 5).max(1);
    image::imageops::resize(img, w, h, FilterType::Triangle)
}

fn render_variant(seed: u64, v: ImageVariant, cache: &mut BTreeMap<usize, RgbImage>) -> Result<(String, Vec<u8>)> {
    let mut original = |o: usize| {
        cache
            .entry(o)
            .or_insert_with(|| synth_image(seed.wrapping_mul(1_000_003).wrapping_add(o as u64)))
            .clone()
    };
    Ok(match v {
        ImageVariant::Original(o) => (format!("img-{o:04}.png"), encode_png(&original(o))?),
        ImageVariant::Recompressed(o) => (format!("img-{o:04}-q75.jpg"), encode_jpeg(&original(o), 75)?),
        ImageVariant::Downscaled(o) => (format!("img-{o:04}-s80.png"), encode_png(&downscale_80(&original(o)))?),
        ImageVariant::DownscaledRecompressed(o) => (
            format!("img-{o:04}-s80-q75.jpg"),
            encode_jpeg(&downscale_80(&original(o)), 75)?,
        ),
        ImageVariant::Single(s) => {
            let img = synth_image(seed.wrapping_mul(7_000_003).wrapping_add(0x5eed_0000 + s as u64));
            (format!("single-{s:04}.jpg"), encode_jpeg(&img, 85)?)
        }
    })
}

fn synthetic_registry(rng: &mut impl Rng, n: usize, first_day: NaiveDate) -> Registry {
    let joined = Utc.from_utc_datetime(&(first_day - Duration::days(30)).and_hms_opt(12, 0, 0).expect("noon"));
    Registry::from_records((0..n).map(|i| {
        let kind = if i % 3 == 2 { ChatKind::Channel } else { ChatKind::Group };
        let member_count = match kind {
            ChatKind::Group => rng.gen_range(20..=200_000),
            ChatKind::Channel => rng.gen_range(100..=1_500_000),
        };
        let title = match kind {
            ChatKind::Group => format!("Grupo Político {:02}", i + 1),
            ChatKind::Channel => format!("Canal Notícias {:02}", i + 1),
        };
        ChatRecord {
            chat_id: format!("chat-{:03}", i + 1),
            kind,
            title,
            member_count,
            joined_at: joined,
        }
    }))
    .expect("generated records are valid")
}

/// A registry of `total` chats of which exactly `above` have more than
/// `threshold` members.
pub fn registry_with_split(seed: u64, total: usize, above: usize, threshold: u64) -> Registry {
    assert!(above <= total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joined = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).single().expect("valid date");
    let mut flags: Vec<bool> = (0..total).map(|i| i < above).collect();
    flags.shuffle(&mut rng);
    Registry::from_records(flags.into_iter().enumerate().map(|(i, big)| {
        let kind = if rng.gen_bool(0.4) { ChatKind::Channel } else { ChatKind::Group };
        let cap = if kind == ChatKind::Group { 200_000 } else { 2_000_000 };
        let member_count = if big { rng.gen_range(threshold + 1..=cap) } else { rng.gen_range(1..=threshold) };
        ChatRecord {
            chat_id: format!("chat-{:03}", i + 1),
            kind,
            title: format!("Chat {:03}", i + 1),
            member_count,
            joined_at: joined,
        }
    }))
    .expect("generated records are valid")
}
