//! Compares the random, coverage and greedy planners on paired missions.
//!
//! Usage: `cargo run --release --example baseline_benchmark -- [missions] [agents]`

use ipp_core::config::EnvConfig;
use ipp_core::evaluation::{paired_t_greater, run_benchmark, write_benchmark_csv, PlannerSpec, TerrainSource};

fn main() -> ipp_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let missions: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let agents: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let cfg = EnvConfig {
        num_agents: agents,
        ..EnvConfig::default()
    };
    let planners = [PlannerSpec::Random, PlannerSpec::Coverage, PlannerSpec::GreedyIg];
    let start = std::time::Instant::now();
    let stats = run_benchmark(&planners, missions, 2024, &cfg, &TerrainSource::Random)?;
    write_benchmark_csv(&mut std::io::stdout(), &stats).expect("stdout");
    let greedy = stats[2].final_entropies();
    for other in &stats[..2] {
        let p = paired_t_greater(&other.final_entropies(), &greedy)?;
        println!("final ROI entropy, {} minus greedy-ig: one-sided p = {p:.3e}", other.planner);
    }
    let p = paired_t_greater(&stats[2].final_f1(), &stats[1].final_f1())?;
    println!("final F1, greedy-ig minus coverage: one-sided p = {p:.3e}");
    eprintln!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
