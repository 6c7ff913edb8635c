//! Trains a small two-agent team and compares it with its untrained actor.
//!
//! Usage: `cargo run --release --example smoke_training -- [seed]`

use ipp_core::config::Config;
use ipp_core::evaluation::{mean_std, welch_t_greater};
use ipp_core::training::{evaluate_returns, Trainer};

fn main() -> ipp_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(7);
    let cfg = Config::parse(include_str!("../../../configs/smoke.cfg"))?;
    let mut trainer = Trainer::new(cfg.clone(), seed)?;
    let untrained = trainer.actor.clone();
    trainer.train(|t| {
        let row = t.log().last().expect("one row per block");
        println!(
            "block {:3}  missions {:4}  return {:7.4}  actor {:9.5}  critic {:9.5}  eps {:.3}",
            row.block, row.missions_done, row.mean_return, row.actor_loss, row.critic_loss, row.epsilon
        );
        Ok(())
    })?;
    let last: Vec<_> = trainer.mission_returns().iter().rev().take(20).copied().collect();
    let trained: Vec<f64> = last.iter().map(|r| r.2).collect();
    let missions: Vec<usize> = last.iter().map(|r| r.0).collect();
    let eps = last[0].1;
    let baseline = evaluate_returns(&untrained, &cfg, seed, &missions, eps)?;
    let (mt, _) = mean_std(&trained);
    let (mb, _) = mean_std(&baseline);
    let p = welch_t_greater(&trained, &baseline)?;
    println!("last 20 missions: trained {mt:.4}, untrained {mb:.4}, Welch one-sided p = {p:.3e}");
    Ok(())
}
