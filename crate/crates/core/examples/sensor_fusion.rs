//! Repeatedly photographs one spot of a split terrain from each altitude and
//! prints how the weighted map entropy and classification error fall.
//!
//! Usage: `cargo run --release --example sensor_fusion`

use ipp_core::config::EnvConfig;
use ipp_core::environment::split_terrain;
use ipp_core::gridmap::{fuse_measurement, map_entropy, simulate_measurement, OccupancyGrid, RngNoise};
use ipp_core::seeding::stream_rng;

fn main() -> ipp_core::Result<()> {
    let cfg = EnvConfig::default();
    let gt = split_terrain(&cfg, 0.6, 0.0);
    let (w, h) = (gt.width(), gt.height());
    let centre = cfg.terrain_side / 2.0;
    println!("altitude,accuracy,shots,entropy_per_cell,misclassified_in_view");
    for &(altitude, accuracy) in cfg.sensor.entries() {
        let mut map = OccupancyGrid::uniform(w, h, cfg.map_resolution);
        let mut rng = stream_rng(1, 0, altitude as u64);
        for shot in 1..=8 {
            let m = simulate_measurement(
                &gt,
                [centre, centre, altitude],
                &cfg.sensor,
                cfg.footprint_factor,
                &mut RngNoise(&mut rng),
                0,
                shot,
            )?;
            fuse_measurement(&mut map, &m)?;
            let wrong = m
                .footprint
                .cells()
                .filter(|&(x, y)| (map.probability(x, y) > 0.5) != (gt.label(x, y) == 1))
                .count();
            let per_cell = map_entropy(&map, &cfg.weights, None)? / (w * h) as f64;
            println!("{altitude},{accuracy},{shot},{per_cell:.5},{wrong}");
        }
    }
    Ok(())
}
