// Size distribution of monitored chats and weekly message volume.
//
//     cargo run --example chat_statistics

use chrono::{Duration, TimeZone, Utc};
use telemonitor::fixture::registry_with_split;
use telemonitor::ingest::ChatKind;
use telemonitor::rank::{fraction_above, members_cdf, weekly_volume};

pub fn run() -> telemonitor::Result<f64> {
    let registry = registry_with_split(5, 60, 36, 256);
    let cdf = members_cdf(&registry, None)?;
    let above = fraction_above(&cdf, 256);
    println!("{} chats, {:.1}% above 256 members", registry.len(), 100.0 * above);
    let groups = members_cdf(&registry, Some(ChatKind::Group))?;
    println!("largest group: {} members", groups.last().map_or(0, |p| p.member_count));

    // Volume doubling half way through.
    let start = Utc.with_ymd_and_hms(2021, 1, 4, 0, 0, 0).unwrap();
    let timestamps = (0..8i64).flat_map(|week| {
        let per_week = if week < 4 { 700 } else { 1400 };
        (0..per_week).map(move |i| start + Duration::weeks(week) + Duration::seconds(i * 431))
    });
    for w in weekly_volume(timestamps) {
        println!("{}  {:>5}  {}", w.week, w.count, "#".repeat((w.count / 100) as usize));
    }
    Ok(above)
}

fn main() -> telemonitor::Result<()> {
    run()?;
    Ok(())
}
