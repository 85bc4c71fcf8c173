// Ranks the most shared images and texts of one week and shows where the
// top image circulated.
//
//     cargo run --example rank_period

use telemonitor::fixture::{self, FixtureOptions};
use telemonitor::ingest::{MediaKind, Pseudonymizer};
use telemonitor::rank::{Catalog, Period};
use telemonitor::{pipeline, store};

pub fn run() -> telemonitor::Result<usize> {
    let dir = tempfile::tempdir().map_err(|e| telemonitor::Error::Config(e.to_string()))?;
    let (input, dataset) = (dir.path().join("input"), dir.path().join("dataset"));
    fixture::generate(&input, &FixtureOptions::new(3, 1500))?;
    pipeline::ingest_dir(&input, &dataset, &Pseudonymizer::new(b"example secret")?)?;
    pipeline::process_dataset(&dataset, &Default::default())?;
    let catalog = Catalog::new(store::load_snapshot(&dataset)?)?;

    let week = Period::parse("2021-03-01", "2021-03-07")?;
    let mut shown = 0;
    for kind in [MediaKind::Image, MediaKind::Text] {
        println!("top {kind} for {week}");
        for e in catalog.top_content(week, kind, 5)? {
            println!(
                "  #{} {} shares={} groups={} senders={}",
                e.rank, e.cluster_id, e.period_share_count, e.period_distinct_groups, e.period_distinct_senders
            );
            shown += 1;
        }
    }

    if let Some(top) = catalog.top_content(week, MediaKind::Image, 1)?.first() {
        let d = catalog.content_details(&top.cluster_id, Some(week), "https://monitor.example")?;
        println!("{} seen in: {}", d.cluster_id, d.group_titles.join(", "));
        if let Some(url) = d.reverse_search_url {
            println!("reverse image search: {url}");
        }
    }
    Ok(shown)
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}
