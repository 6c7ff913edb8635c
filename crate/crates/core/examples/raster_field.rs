//! Thresholds a synthetic 500 x 500 temperature raster at 25 °C and plans
//! over the resulting field with the non-learned planners.
//!
//! Usage: `cargo run --release --example raster_field -- [missions]`

use std::sync::Arc;

use ipp_core::config::Config;
use ipp_core::evaluation::{run_benchmark, write_benchmark_csv, PlannerSpec, TerrainSource};
use ipp_core::raster::{synthetic_temperature_field, threshold_raster};

fn main() -> ipp_core::Result<()> {
    let missions: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let cfg = Config::parse(include_str!("../../../configs/real.cfg"))?;
    let raster = synthetic_temperature_field(500, 500, 0.08, 5)?;
    let ingested = threshold_raster(&raster, 25.0)?;
    println!("interesting fraction {:.3}", ingested.interesting_fraction);
    let terrain = TerrainSource::Fixed(Arc::new(ingested.map));
    let planners = [PlannerSpec::Random, PlannerSpec::Coverage, PlannerSpec::GreedyIg];
    let stats = run_benchmark(&planners, missions, 11, &cfg.env, &terrain)?;
    write_benchmark_csv(&mut std::io::stdout(), &stats).expect("stdout");
    Ok(())
}
