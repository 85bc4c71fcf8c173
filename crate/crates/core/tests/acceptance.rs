//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any failed.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use chrono::{NaiveDate, TimeZone, Utc};
use common::{files_under, oracle, pseudonymizer};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telemonitor::api::{router, Account, Accounts, ApiSettings, ApiState};
use telemonitor::fingerprint::{checksum128, hamming, jaccard, phash64_bytes, phash64_luma, text_shingles, Fingerprint, PHash64};
use telemonitor::fixture::{self, registry_with_split, FixtureOptions, Manifest};
use telemonitor::ingest::{MediaKind, RawMessage};
use telemonitor::pipeline;
use telemonitor::rank::{fraction_above, weekly_volume, Catalog, Period};
use telemonitor::store::{self, BlobStore};
use tower::ServiceExt;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Large {
    dir: tempfile::TempDir,
    manifest: Manifest,
    elapsed: Duration,
}

impl Large {
    fn dataset(&self) -> std::path::PathBuf {
        self.dir.path().join("dataset")
    }
}

fn build_large() -> Large {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    let manifest = fixture::generate(&input, &FixtureOptions::new(2021, 10_000)).unwrap();
    let start = Instant::now();
    common::ingest_and_process(&input, &dir.path().join("dataset"));
    Large {
        elapsed: start.elapsed(),
        dir,
        manifest,
    }
}

/// Pairwise precision and recall of the image clusters against the
/// planted originals.
fn near_duplicate_detection(large: &Large) -> Outcome {
    let ds = store::load_snapshot(&large.dataset()).unwrap();
    let mut predicted: HashMap<(String, String), usize> = HashMap::new();
    for (i, c) in ds.clusters.iter().enumerate().filter(|(_, c)| c.kind == MediaKind::Image) {
        for m in &c.members {
            predicted.insert((m.chat_id.clone(), m.msg_id.clone()), i);
        }
    }
    let images: Vec<_> = large.manifest.truth.iter().filter(|t| t.kind == MediaKind::Image).collect();
    let originals: BTreeSet<&str> = images.iter().map(|t| t.content.as_str()).collect();
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (i, a) in images.iter().enumerate() {
        let pa = predicted[&(a.chat_id.clone(), a.msg_id.clone())];
        for b in &images[i + 1..] {
            let same_truth = a.content == b.content;
            let same_pred = pa == predicted[&(b.chat_id.clone(), b.msg_id.clone())];
            match (same_truth, same_pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
    }
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    let recall = tp as f64 / (tp + fn_).max(1) as f64;
    let secs = large.elapsed.as_secs_f64();
    check(
        precision >= 0.99 && recall >= 0.95 && secs < 120.0 && tp > 0,
        format!(
            "{} image messages, {} planted contents: recall {recall:.4} (>= 0.95), precision {precision:.4} (>= 0.99), ingest+process {secs:.1}s (< 120s)",
            images.len(),
            originals.len()
        ),
    )
}

/// Clusters and rankings of a 1000-message corpus against brute force.
fn clusters_and_rankings_match_oracle() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    let dataset_dir = dir.path().join("dataset");
    fixture::generate(&input, &FixtureOptions::new(1000, 1000)).unwrap();
    common::ingest_and_process(&input, &dataset_dir);
    let ds = store::load_snapshot(&dataset_dir).unwrap();

    let blobs = BlobStore::open(&dataset_dir);
    let prints: Vec<(&RawMessage, Fingerprint)> = ds
        .messages
        .iter()
        .map(|m| (m, telemonitor::fingerprint::fingerprint_message(m, |b| blobs.get_blob(b)).unwrap()))
        .collect();
    let items: Vec<(&RawMessage, &Fingerprint)> = prints.iter().map(|(m, f)| (*m, f)).collect();
    let want = oracle::expected_clusters(&items);
    let got = oracle::facts(&ds.clusters);
    if got != want {
        let missing = want.difference(&got).count();
        return Err(format!("{} clusters differ from the all-pairs closure", missing));
    }

    let catalog = Catalog::new(ds).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let base = NaiveDate::from_ymd_opt(2021, 2, 15).unwrap();
    let mut compared = 0;
    for _ in 0..20 {
        let from = base + chrono::Duration::days(rng.gen_range(0..35));
        let to = from + chrono::Duration::days(rng.gen_range(0..10));
        let kind = [MediaKind::Image, MediaKind::Video, MediaKind::Audio, MediaKind::Text][rng.gen_range(0..4)];
        let expected = oracle::ranking(catalog.dataset(), from, to, kind);
        let actual = catalog.top_content(Period::new(from, to).unwrap(), kind, 100_000).unwrap();
        if actual != expected {
            return Err(format!("top_content {kind} {from}..{to} differs from the recount"));
        }
        compared += actual.len();
    }
    Ok(format!(
        "{} clusters equal the all-pairs closure (partition and counters); 20 random periods, {compared} ranked entries equal the recount",
        want.len()
    ))
}

/// Share of chats above 256 members, through ingest and the catalog.
fn registry_fraction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    std::fs::create_dir_all(&input).unwrap();
    std::fs::write(input.join(pipeline::INPUT_REGISTRY), registry_with_split(232, 232, 153, 256).to_json()).unwrap();
    let dataset = dir.path().join("dataset");
    pipeline::ingest_dir(&input, &dataset, &pseudonymizer()).unwrap();
    let catalog = Catalog::new(store::load_snapshot(&dataset).unwrap()).unwrap();
    let got = fraction_above(&catalog.members_cdf(None).unwrap(), 256);
    let want = 153.0 / 232.0;
    check(
        (got - want).abs() <= 1e-9,
        format!("fraction above 256 members = {got:.12}, expected 153/232 = {want:.12}"),
    )
}

/// Weekly volume of a synthetic year: about 20k messages a week through
/// 2020, about 80k a week from January 2021.
fn weekly_volume_plateaus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = Utc.with_ymd_and_hms(2020, 6, 1, 0, 0, 0).unwrap(); // a Monday
    let switch = Utc.with_ymd_and_hms(2021, 1, 4, 0, 0, 0).unwrap(); // first Monday of 2021
    let end = Utc.with_ymd_and_hms(2021, 3, 29, 0, 0, 0).unwrap();
    let mut weeks = Vec::new();
    let mut monday = start;
    while monday < end {
        let base = if monday < switch { 20_000.0 } else { 80_000.0 };
        weeks.push((monday, (base * rng.gen_range(0.95..1.05)) as u64));
        monday += chrono::Duration::days(7);
    }
    let timestamps = weeks.iter().flat_map(|&(monday, n)| {
        let mut r = ChaCha8Rng::seed_from_u64(monday.timestamp() as u64);
        (0..n).map(move |_| monday + chrono::Duration::seconds(r.gen_range(0..7 * 86_400)))
    });
    let volume = weekly_volume(timestamps);
    let planted: Vec<u64> = weeks.iter().map(|w| w.1).collect();
    let counted: Vec<u64> = volume.iter().map(|w| w.count).collect();
    if counted != planted {
        return Err("weekly counts differ from the planted counts".into());
    }
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    let before: Vec<u64> = volume.iter().filter(|w| w.week.starts_with("2020")).map(|w| w.count).collect();
    let after: Vec<u64> = volume.iter().filter(|w| w.week.starts_with("2021")).map(|w| w.count).collect();
    let ratio = mean(&after) / mean(&before);
    check(
        (ratio - 4.0).abs() <= 0.1,
        format!(
            "{} weeks, {} messages, every week exact; 2021 plateau {:.0}/week vs 2020 plateau {:.0}/week = {ratio:.3}x (4.0 ± 0.1)",
            volume.len(),
            planted.iter().sum::<u64>(),
            mean(&after),
            mean(&before),
        ),
    )
}

fn fingerprint_suite() -> Outcome {
    let vectors: [(&str, &str); 7] = [
        ("", "d41d8cd98f00b204e9800998ecf8427e"),
        ("a", "0cc175b9c0f1b6a831c399e269772661"),
        ("abc", "900150983cd24fb0d6963f7d28e17f72"),
        ("message digest", "f96b697d7cb7938d525a2f31aaf161d0"),
        ("abcdefghijklmnopqrstuvwxyz", "c3fcd3d76192e4007dfb496cca67e13b"),
        ("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789", "d174ab98d277d9f5a5611c2c9f419d9f"),
        (
            "12345678901234567890123456789012345678901234567890123456789012345678901234567890",
            "57edf4a22be3c955ac49da2e2107b67a",
        ),
    ];
    for (input, want) in vectors {
        if checksum128(input.as_bytes()).to_hex() != want {
            return Err(format!("MD5 of {input:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for _ in 0..10_000 {
        let (a, b, c) = (PHash64(rng.gen()), PHash64(rng.gen()), PHash64(rng.gen()));
        let ok = hamming(a, a) == 0
            && hamming(a, b) == hamming(b, a)
            && hamming(a, b) <= 64
            && (hamming(a, b) == 0) == (a == b)
            && hamming(a, c) <= hamming(a, b) + hamming(b, c);
        if !ok {
            return Err(format!("Hamming metric property fails for {a} {b} {c}"));
        }
    }

    let s = text_shingles("o povo quer votar hoje");
    let half_a = text_shingles("w1 w2 w3 w4 w5");
    let half_b = text_shingles("w2 w3 w4 w5 w6");
    if jaccard(&s, &s) != 1.0
        || jaccard(&s, &text_shingles("nada a ver com isso")) != 0.0
        || jaccard(&half_a, &half_b) != 0.5
    {
        return Err("Jaccard reference values".into());
    }
    if phash64_luma(64, 48, &vec![93.0; 64 * 48]) != PHash64(0) {
        return Err("constant image does not hash to 0".into());
    }

    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/phash_corpus");
    let hash = |name: &str| phash64_bytes(&std::fs::read(corpus.join(name)).unwrap()).unwrap();
    let originals: Vec<PHash64> = (0..20).map(|i| hash(&format!("{i:02}.png"))).collect();
    let mut worst_near = 0;
    for (i, h) in originals.iter().enumerate() {
        for v in [format!("{i:02}_q75.jpg"), format!("{i:02}_s80.png")] {
            worst_near = worst_near.max(hamming(*h, hash(&v)));
        }
    }
    let mut closest_far = 64;
    for i in 0..originals.len() {
        for j in i + 1..originals.len() {
            closest_far = closest_far.min(hamming(originals[i], originals[j]));
        }
    }
    check(
        worst_near <= 10 && closest_far >= 20,
        format!(
            "MD5 vectors, 10000 Hamming triples, Jaccard 1/0/0.5, constant hash 0; corpus: max near-duplicate distance {worst_near} (<= 10), min distinct distance {closest_far} (>= 20)"
        ),
    )
}

async fn call(app: &Router, uri: &str, token: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::get(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let resp = app.clone().oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

/// Crawls every endpoint over the large corpus and scans the responses for
/// sender identities, raw or pseudonymized.
async fn privacy(large: &Large) -> Outcome {
    let accounts = Accounts::new([Account::with_rounds("analyst", "pw", 1000).unwrap()]).unwrap();
    let state = ApiState::open(&large.dataset(), accounts, ApiSettings::default()).unwrap();
    let catalog = state.catalog();
    let app = router(Arc::new(state));

    let login = Request::post("/api/login")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(r#"{"username":"analyst","password":"pw"}"#))
        .unwrap();
    let resp = app.clone().oneshot(login).await.unwrap();
    let login_body = resp.into_body().collect().await.unwrap().to_bytes();
    let token: serde_json::Value = serde_json::from_slice(&login_body).unwrap();
    let token = token["token"].as_str().unwrap().to_string();

    let mut uris = vec!["/api/stats/members_cdf".to_string(), "/api/stats/weekly_volume".to_string()];
    for kind in ["image", "video", "audio", "text"] {
        uris.push(format!("/api/top?from=2021-01-01&to=2021-12-31&kind={kind}&limit=200"));
        for d in 0..35 {
            let day = NaiveDate::from_ymd_opt(2021, 2, 15).unwrap() + chrono::Duration::days(d);
            uris.push(format!("/api/top?from={day}&to={day}&kind={kind}&limit=200"));
        }
    }
    for c in &catalog.dataset().clusters {
        uris.push(format!("/api/content/{}", c.cluster_id));
        let day = c.first_seen.date_naive();
        uris.push(format!("/api/content/{}?from={day}&to={day}", c.cluster_id));
    }
    let checksums: BTreeSet<_> =
        catalog.dataset().messages.iter().filter_map(|m| m.media_ref.as_ref()).map(|b| b.checksum).collect();
    uris.extend(checksums.iter().map(|c| format!("/api/media/{c}")));

    let mut needles: BTreeSet<String> = large.manifest.sender_ids.iter().cloned().collect();
    needles.extend(catalog.dataset().messages.iter().map(|m| m.sender.to_string()));
    let needles: Vec<&[u8]> = needles.iter().map(|s| s.as_bytes()).collect();

    let mut bytes = login_body.len();
    let mut hits = 0;
    let mut unauthenticated_ok = 0;
    let mut failed = 0;
    for uri in &uris {
        let (status, body) = call(&app, uri, Some(&token)).await;
        failed += usize::from(status != StatusCode::OK);
        bytes += body.len();
        hits += needles.iter().filter(|n| body.windows(n.len()).any(|w| w == **n)).count();
        let (status, _) = call(&app, uri, None).await;
        unauthenticated_ok += usize::from(status != StatusCode::UNAUTHORIZED);
    }
    check(
        hits == 0 && unauthenticated_ok == 0 && failed == 0,
        format!(
            "{} responses ({bytes} bytes) scanned for {} sender identities: {hits} hits; {unauthenticated_ok} endpoints answered without a token; {failed} authenticated requests failed",
            uris.len(),
            needles.len()
        ),
    )
}

fn persistence(large: &Large) -> Outcome {
    let tables = |dir: &Path| -> Vec<Vec<u8>> { store::table_paths(dir).iter().map(|p| std::fs::read(p).unwrap()).collect() };
    let original = tables(&large.dataset());
    let loaded = store::load_snapshot(&large.dataset()).unwrap();
    let copy = large.dir.path().join("resnapshot");
    store::snapshot(&loaded, &copy).unwrap();
    let identical = tables(&copy) == original;
    let distinct: BTreeSet<_> = loaded.messages.iter().filter_map(|m| m.media_ref.as_ref()).map(|b| b.checksum).collect();
    let files = files_under(&large.dataset().join("blobs")).len();
    check(
        identical && files == distinct.len(),
        format!(
            "snapshot -> load -> snapshot of {} messages byte-identical: {identical}; {files} blob files for {} distinct checksums",
            loaded.messages.len(),
            distinct.len()
        ),
    )
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            false
        }
    }
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let large = build_large();
    let results = [
        run("1 near-duplicate detection", || near_duplicate_detection(&large)),
        run("2 clustering and ranking oracle", clusters_and_rankings_match_oracle),
        run("3 member-count distribution", registry_fraction),
        run("4 weekly volume growth", weekly_volume_plateaus),
        run("5 fingerprint suite", fingerprint_suite),
        run("6 privacy and authentication", || runtime.block_on(privacy(&large))),
        run("7 persistence round trip", || persistence(&large)),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
