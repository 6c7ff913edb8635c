//! Mission metrics, paired benchmarks and the statistics used to compare
//! planners.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::environment::{generate_terrain, Action, EnvConfig, Environment, LogRow};
use crate::error::{Error, Result};
use crate::gridmap::{map_entropy, GroundTruthMap, ImportanceWeights, OccupancyGrid};
use crate::planners::{CoveragePlanner, GreedyPlanner, PlanContext, Planner, RandomPlanner};
use crate::policy::{Actor, LearnedPlanner, SampleMode};
use crate::seeding::{derive_seed, stream_rng, TAG_NOISE, TAG_PLANNER, TAG_TERRAIN};

/// Metrics of the team map after one step. Step 0 is the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub roi_entropy: f64,
    pub f1: f64,
    pub cumulative_reward: f64,
}

fn check_dims(grid: &OccupancyGrid, gt: &GroundTruthMap) -> Result<()> {
    if grid.width() != gt.width() || grid.height() != gt.height() {
        return Err(Error::Contract(format!(
            "map is {} x {}, ground truth {} x {}",
            grid.width(),
            grid.height(),
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

/// Precomputed ROI mask and prior entropy for one ground truth.
#[derive(Debug, Clone)]
pub struct RoiMetrics {
    roi: Vec<bool>,
    prior: f64,
    weights: ImportanceWeights,
    width: usize,
    height: usize,
}

impl RoiMetrics {
    pub fn new(gt: &GroundTruthMap, weights: ImportanceWeights) -> Result<Self> {
        if gt.interesting_count() == 0 {
            return Err(Error::DegenerateTerrain("ground truth has no interesting cell".into()));
        }
        let roi = gt.roi_mask();
        let uniform = OccupancyGrid::uniform(gt.width(), gt.height(), gt.resolution());
        let prior = map_entropy(&uniform, &weights, Some(&roi))?;
        Ok(Self {
            roi,
            prior,
            weights,
            width: gt.width(),
            height: gt.height(),
        })
    }

    fn check(&self, grid: &OccupancyGrid) -> Result<()> {
        if grid.width() != self.width || grid.height() != self.height {
            return Err(Error::Contract("map and ground truth differ in size".into()));
        }
        Ok(())
    }

    /// ROI entropy relative to the uniform prior.
    pub fn entropy(&self, grid: &OccupancyGrid) -> Result<f64> {
        self.check(grid)?;
        Ok(map_entropy(grid, &self.weights, Some(&self.roi))? / self.prior)
    }

    pub fn f1(&self, grid: &OccupancyGrid) -> Result<f64> {
        self.check(grid)?;
        Ok(f1_of(grid.probabilities(), self.roi.iter().copied()))
    }
}

/// Weighted entropy of the ROI cells divided by its value under the
/// uniform prior.
pub fn roi_entropy(grid: &OccupancyGrid, gt: &GroundTruthMap, w: &ImportanceWeights) -> Result<f64> {
    check_dims(grid, gt)?;
    RoiMetrics::new(gt, *w)?.entropy(grid)
}

/// F1 of the class-1 prediction `p > 0.5` against the ground truth. A map
/// predicting no positive scores 0.
pub fn f1_score(grid: &OccupancyGrid, gt: &GroundTruthMap) -> Result<f64> {
    check_dims(grid, gt)?;
    Ok(f1_of(grid.probabilities(), gt.cells().iter().map(|&c| c == 1)))
}

fn f1_of(probs: &[f64], truth: impl Iterator<Item = bool>) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, t) in probs.iter().zip(truth) {
        match (p > 0.5, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// A planner that can be instantiated afresh for every mission.
#[derive(Debug, Clone)]
pub enum PlannerSpec {
    Random,
    Coverage,
    GreedyIg,
    Learned(Arc<Actor>, SampleMode),
}

impl PlannerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerSpec::Random => "random",
            PlannerSpec::Coverage => "coverage",
            PlannerSpec::GreedyIg => "greedy-ig",
            PlannerSpec::Learned(..) => "learned",
        }
    }

    pub fn build(&self) -> Box<dyn Planner + Send> {
        match self {
            PlannerSpec::Random => Box::new(RandomPlanner),
            PlannerSpec::Coverage => Box::new(CoveragePlanner::new()),
            PlannerSpec::GreedyIg => Box::new(GreedyPlanner),
            PlannerSpec::Learned(actor, mode) => Box::new(LearnedPlanner::new(actor.clone(), *mode)),
        }
    }
}

/// Where mission terrains come from.
#[derive(Debug, Clone)]
pub enum TerrainSource {
    /// A fresh random terrain per mission.
    Random,
    /// The same terrain every mission; only sensor noise and sampling vary.
    Fixed(Arc<GroundTruthMap>),
}

impl TerrainSource {
    pub fn terrain(&self, cfg: &EnvConfig, seed: u64, mission: usize) -> GroundTruthMap {
        match self {
            TerrainSource::Random => generate_terrain(&mut stream_rng(seed, TAG_TERRAIN, mission as u64), cfg),
            TerrainSource::Fixed(gt) => gt.as_ref().clone(),
        }
    }
}

/// Which map the metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapScope {
    #[default]
    Global,
    Agent(usize),
}

#[derive(Debug, Clone)]
pub struct MissionResult {
    pub log: Vec<LogRow>,
    pub metrics: Vec<MetricsRecord>,
    pub terrain: GroundTruthMap,
    pub final_map: OccupancyGrid,
    pub noise_seed: u64,
}

fn scoped_map(env: &Environment, scope: MapScope) -> Result<&OccupancyGrid> {
    match scope {
        MapScope::Global => Ok(&env.global().map),
        MapScope::Agent(k) if k < env.num_agents() => Ok(&env.local(k).map),
        MapScope::Agent(k) => Err(Error::Config(format!("no agent {k}"))),
    }
}

fn prior_record() -> MetricsRecord {
    MetricsRecord {
        step: 0,
        roi_entropy: 1.0,
        f1: 0.0,
        cumulative_reward: 0.0,
    }
}

/// Runs mission `mission` of the stream `seed` with a fresh planner.
pub fn run_mission(
    planner: &PlannerSpec,
    cfg: &EnvConfig,
    terrain: &TerrainSource,
    seed: u64,
    mission: usize,
    scope: MapScope,
) -> Result<MissionResult> {
    let gt = terrain.terrain(cfg, seed, mission);
    let metrics_of = RoiMetrics::new(&gt, cfg.weights)?;
    let noise_seed = derive_seed(seed, TAG_NOISE, mission as u64);
    let mut env = Environment::new(cfg.clone(), gt.clone(), noise_seed)?;
    let mut rng = stream_rng(seed, TAG_PLANNER, mission as u64);
    let mut p = planner.build();
    let mut metrics = vec![prior_record()];
    let mut total = 0.0;
    while !env.done() {
        let step = env.global().step;
        let mut actions = Vec::with_capacity(env.num_agents());
        for i in 0..env.num_agents() {
            let ctx = PlanContext {
                cfg: env.cfg(),
                local: env.local(i),
                mask: env.valid_actions(i),
            };
            let a = p.act(&ctx, &mut rng).map_err(|e| Error::Contract(format!(
                "{} planner failed at step {step}, agent {i}: {e}",
                planner.name()
            )))?;
            actions.push(a);
        }
        let out = env.step(&actions).map_err(|e| match e {
            Error::RejectedStep { agent, reason } => Error::RejectedStep {
                agent,
                reason: format!("step {step}: {reason}"),
            },
            other => other,
        })?;
        total += out.reward;
        let map = scoped_map(&env, scope)?;
        metrics.push(MetricsRecord {
            step: step + 1,
            roi_entropy: metrics_of.entropy(map)?,
            f1: metrics_of.f1(map)?,
            cumulative_reward: total,
        });
    }
    Ok(MissionResult {
        log: env.log().to_vec(),
        final_map: env.global().map.clone(),
        terrain: gt,
        metrics,
        noise_seed,
    })
}

/// Recomputes the metrics of a mission by replaying the logged actions.
pub fn replay_metrics(
    cfg: &EnvConfig,
    terrain: &GroundTruthMap,
    noise_seed: u64,
    log: &[LogRow],
) -> Result<Vec<MetricsRecord>> {
    let metrics_of = RoiMetrics::new(terrain, cfg.weights)?;
    let mut env = Environment::new(cfg.clone(), terrain.clone(), noise_seed)?;
    let mut metrics = vec![prior_record()];
    let mut total = 0.0;
    let n = env.num_agents();
    for step in 1..=cfg.budget {
        let mut actions: Vec<Option<Action>> = vec![None; n];
        for r in log.iter().filter(|r| r.step == step) {
            if r.agent < n {
                actions[r.agent] = r.action;
            }
        }
        let actions = actions
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.ok_or_else(|| Error::Data(format!("log lacks agent {i} at step {step}"))))
            .collect::<Result<Vec<_>>>()?;
        total += env.step(&actions)?.reward;
        metrics.push(MetricsRecord {
            step,
            roi_entropy: metrics_of.entropy(&env.global().map)?,
            f1: metrics_of.f1(&env.global().map)?,
            cumulative_reward: total,
        });
    }
    Ok(metrics)
}

/// Steps at which benchmarks report: a third, two thirds and all of the
/// budget, rounded up.
pub fn checkpoint_steps(budget: usize) -> [usize; 3] {
    [(33 * budget).div_ceil(100), (66 * budget).div_ceil(100), budget]
}

/// Sample mean and unbiased standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStats {
    pub step: usize,
    pub entropy_mean: f64,
    pub entropy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

/// Benchmark results of one planner.
#[derive(Debug, Clone)]
pub struct TrialStats {
    pub planner: String,
    pub checkpoints: Vec<CheckpointStats>,
    /// Metric sequences of every mission, in mission order.
    pub missions: Vec<Vec<MetricsRecord>>,
}

impl TrialStats {
    pub fn from_missions(planner: &str, budget: usize, missions: Vec<Vec<MetricsRecord>>) -> Result<Self> {
        if missions.len() < 2 {
            return Err(Error::Usage(format!(
                "statistics need at least 2 missions, got {}",
                missions.len()
            )));
        }
        let checkpoints = checkpoint_steps(budget)
            .into_iter()
            .map(|step| {
                let e: Vec<f64> = missions.iter().map(|m| m[step].roi_entropy).collect();
                let f: Vec<f64> = missions.iter().map(|m| m[step].f1).collect();
                let (entropy_mean, entropy_std) = mean_std(&e);
                let (f1_mean, f1_std) = mean_std(&f);
                CheckpointStats {
                    step,
                    entropy_mean,
                    entropy_std,
                    f1_mean,
                    f1_std,
                }
            })
            .collect();
        Ok(Self {
            planner: planner.to_string(),
            checkpoints,
            missions,
        })
    }

    pub fn final_entropies(&self) -> Vec<f64> {
        self.missions.iter().map(|m| m.last().unwrap().roi_entropy).collect()
    }

    pub fn final_f1(&self) -> Vec<f64> {
        self.missions.iter().map(|m| m.last().unwrap().f1).collect()
    }
}

/// Evaluates every planner on the same `n` seeded missions.
pub fn run_benchmark(
    planners: &[PlannerSpec],
    n: usize,
    seed: u64,
    cfg: &EnvConfig,
    terrain: &TerrainSource,
) -> Result<Vec<TrialStats>> {
    if n < 2 {
        return Err(Error::Usage(format!("a benchmark needs at least 2 missions, got {n}")));
    }
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..planners.len()).flat_map(|p| (0..n).map(move |m| (p, m))).collect();
    let results: Vec<Vec<MetricsRecord>> = jobs
        .par_iter()
        .map(|&(p, m)| run_mission(&planners[p], cfg, terrain, seed, m, MapScope::Global).map(|r| r.metrics))
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    planners
        .iter()
        .map(|p| TrialStats::from_missions(p.name(), cfg.budget, it.by_ref().take(n).collect()))
        .collect()
}

pub const BENCHMARK_HEADER: &str = "planner,checkpoint,entropy_mean,entropy_std,f1_mean,f1_std";

pub fn write_benchmark_csv<W: Write>(w: &mut W, stats: &[TrialStats]) -> std::io::Result<()> {
    writeln!(w, "{BENCHMARK_HEADER}")?;
    for s in stats {
        for c in &s.checkpoints {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.planner, c.step, c.entropy_mean, c.entropy_std, c.f1_mean, c.f1_std
            )?;
        }
    }
    Ok(())
}

pub const MISSION_METRICS_HEADER: &str = "step,roi_entropy,f1,cumulative_reward";

pub fn write_mission_metrics<W: Write>(w: &mut W, metrics: &[MetricsRecord]) -> std::io::Result<()> {
    writeln!(w, "{MISSION_METRICS_HEADER}")?;
    for m in metrics {
        writeln!(w, "{},{},{},{}", m.step, m.roi_entropy, m.f1, m.cumulative_reward)?;
    }
    Ok(())
}

fn t_upper_tail(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    1.0 - dist.cdf(t)
}

/// One-sided paired t-test of `mean(a - b) > 0`; returns the p-value.
pub fn paired_t_greater(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract("paired test needs two equal samples of size >= 2".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, s) = mean_std(&d);
    let n = d.len() as f64;
    if s == 0.0 {
        return Ok(if m > 0.0 { 0.0 } else { 1.0 });
    }
    Ok(t_upper_tail(m / (s / n.sqrt()), n - 1.0))
}

/// One-sided Welch t-test of `mean(a) > mean(b)`; returns the p-value.
pub fn welch_t_greater(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Contract("Welch test needs samples of size >= 2".into()));
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    if va + vb == 0.0 {
        return Ok(if ma > mb { 0.0 } else { 1.0 });
    }
    let t = (ma - mb) / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(t_upper_tail(t, dof))
}
