//! Record waypoint baselines, then patrol and flag changed scenes.
//!
//! Usage: cargo run --example anomaly_patrol [STORE_DIR]

use vlx::backend::{Gateway, MockBackend};
use vlx::image::ImageBuffer;
use vlx::patrol::{Patrol, PatrolEntry, Store};

fn main() -> vlx::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("vlx-patrol-demo"));
    let gateway = Gateway::new(
        MockBackend::builder()
            .caption("shelf-day1", "a closed shelf")
            .caption("shelf-day2", "a shelf with dishes and an open door")
            .caption("desk-day1", "a laptop on a desk")
            .caption("desk-day2", "a laptop on a desk")
            .build(),
    );
    let img = |id: &str, shade: f32| ImageBuffer::filled(80, 60, [shade, shade, 0.5]).map(|i| i.with_id(id));

    let patrol = Patrol::new(gateway, Store::open(&dir)?);
    patrol.record_baseline("shelf", "kitchen shelf", &img("shelf-day1", 0.3)?)?;
    patrol.record_baseline("desk", "office desk", &img("desk-day1", 0.6)?)?;

    let route = vec![
        ("shelf".to_string(), img("shelf-day2", 0.35)?),
        ("desk".to_string(), img("desk-day2", 0.6)?),
        ("garage".to_string(), img("desk-day2", 0.1)?),
    ];
    for entry in patrol.patrol(&route, 0.8)? {
        match entry {
            PatrolEntry::Report(r) => println!(
                "{:<6} similarity {:.3} anomalous {}  ({:?} -> {:?})",
                r.waypoint_id, r.similarity, r.anomalous, r.baseline_caption, r.current_caption
            ),
            PatrolEntry::Failed { waypoint_id, error, .. } => println!("{waypoint_id:<6} {error}"),
        }
    }
    println!("store: {}", dir.display());
    Ok(())
}
