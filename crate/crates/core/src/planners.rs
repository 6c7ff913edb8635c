//! Non-learned planners.

use rand::{Rng, RngCore};

use crate::environment::{Action, ActionMask, AgentLocalState, EnvConfig, LatticePos};
use crate::error::{Error, Result};
use crate::gridmap::{
    footprint, weighted_entropy_unchecked, CellRect, CompensatedSum, ImportanceWeights,
    OccupancyGrid, ValueCache,
};

/// What one agent knows when it picks its next action.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub cfg: &'a EnvConfig,
    pub local: &'a AgentLocalState,
    pub mask: ActionMask,
}

/// A decision rule shared by all agents of one mission. Implementations
/// that keep per-agent state index it by `ctx.local.id`.
pub trait Planner {
    fn name(&self) -> &str;

    fn act(&mut self, ctx: &PlanContext<'_>, rng: &mut dyn RngCore) -> Result<Action>;
}

fn valid_list(mask: &ActionMask) -> Result<Vec<Action>> {
    let v: Vec<Action> = Action::ALL.into_iter().filter(|a| mask[a.index()]).collect();
    if v.is_empty() {
        return Err(Error::Contract("no valid action".into()));
    }
    Ok(v)
}

/// Uniform choice among valid actions.
#[derive(Debug, Clone, Default)]
pub struct RandomPlanner;

pub fn random_action(mask: &ActionMask, rng: &mut dyn RngCore) -> Result<Action> {
    let valid = valid_list(mask)?;
    Ok(valid[rng.random_range(0..valid.len())])
}

impl Planner for RandomPlanner {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, ctx: &PlanContext<'_>, rng: &mut dyn RngCore) -> Result<Action> {
        random_action(&ctx.mask, rng)
    }
}

/// Columns `[lo, hi)` of agent `k`'s stripe when `columns` are split among `n`.
pub fn stripe(k: usize, n: usize, columns: usize) -> (usize, usize) {
    (k * columns / n, (k + 1) * columns / n)
}

/// Serpentine over the stripe starting on `row` at whichever end is closer
/// to `col` (east on ties).
fn serpentine(lo: usize, hi: usize, rows: usize, col: usize) -> Vec<(usize, usize)> {
    let start_east = (hi - 1).abs_diff(col) <= col.abs_diff(lo);
    let mut path = Vec::with_capacity((hi - lo) * rows);
    for r in 0..rows {
        let eastward = (r % 2 == 0) != start_east;
        if eastward {
            path.extend((lo..hi).map(|c| (c, r)));
        } else {
            path.extend((lo..hi).rev().map(|c| (c, r)));
        }
    }
    path
}

#[derive(Debug, Clone)]
struct Sweep {
    path: Vec<(usize, usize)>,
    cursor: usize,
}

/// Lawnmower sweep of a fixed vertical stripe per agent at one altitude.
#[derive(Debug, Clone, Default)]
pub struct CoveragePlanner {
    sweeps: Vec<Option<Sweep>>,
}

impl CoveragePlanner {
    pub fn new() -> Self {
        Self::default()
    }

    fn wanted(&mut self, ctx: &PlanContext<'_>) -> Action {
        let cfg = ctx.cfg;
        let id = ctx.local.id;
        let pos = ctx.local.position;
        let level = cfg.level_of(cfg.coverage_altitude).unwrap_or(0);
        if pos.level < level {
            return Action::Up;
        }
        if pos.level > level {
            return Action::Down;
        }
        if self.sweeps.len() <= id {
            self.sweeps.resize(id + 1, None);
        }
        let g = cfg.lattice_size();
        let sweep = self.sweeps[id].get_or_insert_with(|| {
            let (lo, hi) = stripe(id, ctx.local.num_agents, g);
            Sweep {
                path: serpentine(lo, hi, g, pos.col.clamp(lo, hi - 1)),
                cursor: 0,
            }
        });
        if sweep.path[sweep.cursor] == (pos.col, pos.row) {
            sweep.cursor += 1;
            if sweep.cursor == sweep.path.len() {
                sweep.path.reverse();
                sweep.cursor = 1.min(sweep.path.len() - 1);
            }
        }
        let (tc, tr) = sweep.path[sweep.cursor];
        if tc > pos.col {
            Action::East
        } else if tc < pos.col {
            Action::West
        } else if tr > pos.row {
            Action::North
        } else if tr < pos.row {
            Action::South
        } else {
            // single-cell stripe: hover in place by bouncing vertically
            if pos.level + 1 < cfg.num_levels() {
                Action::Up
            } else {
                Action::Down
            }
        }
    }
}

impl Planner for CoveragePlanner {
    fn name(&self) -> &str {
        "coverage"
    }

    fn act(&mut self, ctx: &PlanContext<'_>, _rng: &mut dyn RngCore) -> Result<Action> {
        let a = self.wanted(ctx);
        if ctx.mask[a.index()] {
            Ok(a)
        } else {
            valid_list(&ctx.mask).map(|v| v[0])
        }
    }
}

/// Expected weighted-entropy reduction of one cell at belief `p` under a
/// binary observation that is correct with probability `accuracy`.
pub fn expected_cell_gain(p: f64, accuracy: f64, w: &ImportanceWeights) -> f64 {
    let p1 = accuracy * p + (1.0 - accuracy) * (1.0 - p);
    let p0 = 1.0 - p1;
    let mut expected = 0.0;
    if p1 > 0.0 {
        expected += p1 * weighted_entropy_unchecked(accuracy * p / p1, w);
    }
    if p0 > 0.0 {
        expected += p0 * weighted_entropy_unchecked((1.0 - accuracy) * p / p0, w);
    }
    weighted_entropy_unchecked(p, w) - expected
}

/// Sum of [`expected_cell_gain`] over `rect`.
pub fn expected_gain(map: &OccupancyGrid, rect: &CellRect, accuracy: f64, w: &ImportanceWeights) -> f64 {
    let mut cache = ValueCache::new(|p| expected_cell_gain(p, accuracy, w));
    let mut sum = CompensatedSum::default();
    let probs = map.probabilities();
    for y in rect.y0..rect.y0 + rect.h {
        let row = &probs[y * map.width() + rect.x0..y * map.width() + rect.x0 + rect.w];
        for &p in row {
            sum.add(cache.get(p));
        }
    }
    sum.total()
}

/// Expected gain of each valid action, measured at the target position.
pub fn greedy_gains(ctx: &PlanContext<'_>) -> Result<[Option<f64>; Action::COUNT]> {
    let cfg = ctx.cfg;
    let map = &ctx.local.map;
    let mut gains = [None; Action::COUNT];
    for a in Action::ALL {
        if !ctx.mask[a.index()] {
            continue;
        }
        let Some(t) = ctx.local.position.moved(a, cfg) else {
            continue;
        };
        gains[a.index()] = Some(gain_at(cfg, map, &t)?);
    }
    Ok(gains)
}

fn gain_at(cfg: &EnvConfig, map: &OccupancyGrid, t: &LatticePos) -> Result<f64> {
    let pos = t.meters(cfg);
    let acc = cfg.sensor.accuracy(pos[2])?;
    let rect = footprint(pos, cfg.footprint_factor, map.width(), map.height(), map.resolution())?;
    Ok(expected_gain(map, &rect, acc, &cfg.weights))
}

/// Index of the largest gain; earlier actions win ties within `1e-12`.
pub fn argmax_first(gains: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in gains.iter().enumerate() {
        if let Some(g) = *g {
            match best {
                Some((_, b)) if g <= b + 1e-12 * b.abs().max(1.0) => {}
                _ => best = Some((i, g)),
            }
        }
    }
    best.map(|(i, _)| i)
}

/// One-step lookahead on the agent's local map.
#[derive(Debug, Clone, Default)]
pub struct GreedyPlanner;

impl Planner for GreedyPlanner {
    fn name(&self) -> &str {
        "greedy-ig"
    }

    fn act(&mut self, ctx: &PlanContext<'_>, _rng: &mut dyn RngCore) -> Result<Action> {
        valid_list(&ctx.mask)?;
        let gains = greedy_gains(ctx)?;
        let i = argmax_first(&gains).ok_or_else(|| Error::Contract("no valid action".into()))?;
        Ok(Action::ALL[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{split_terrain, Environment};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(n: usize) -> EnvConfig {
        EnvConfig {
            map_resolution: 0.5,
            num_agents: n,
            ..EnvConfig::default()
        }
    }

    fn local_at(cfg: &EnvConfig, pos: LatticePos) -> AgentLocalState {
        let n = cfg.map_size();
        AgentLocalState {
            id: 0,
            num_agents: 1,
            map: OccupancyGrid::uniform(n, n, cfg.map_resolution),
            position: pos,
            known_positions: vec![pos],
            budget: cfg.budget,
            last_measurement: None,
            heard: vec![],
        }
    }

    #[test]
    fn random_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 6];
        for _ in 0..6000 {
            counts[random_action(&[true; 6], &mut rng).unwrap().index()] += 1;
        }
        for c in counts {
            let f = c as f64 / 6000.0;
            assert!((0.13..=0.20).contains(&f), "{f}");
        }
        let mut mask = [false; 6];
        mask[4] = true;
        assert_eq!(random_action(&mask, &mut rng).unwrap(), Action::West);
        assert!(random_action(&[false; 6], &mut rng).is_err());
    }

    #[test]
    fn random_never_returns_masked() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mask = [true, false, true, false, true, true];
        for _ in 0..10_000 {
            assert!(mask[random_action(&mask, &mut rng).unwrap().index()]);
        }
    }

    #[test]
    fn coverage_boustrophedon() {
        let cfg = EnvConfig {
            num_agents: 1,
            ..small_cfg(1)
        };
        let mut local = local_at(&cfg, LatticePos::new(0, 0, 1));
        let mut planner = CoveragePlanner::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seq = Vec::new();
        for _ in 0..21 {
            let ctx = PlanContext {
                cfg: &cfg,
                local: &local,
                mask: crate::environment::valid_actions(&[local.position], 0, &cfg),
            };
            let a = planner.act(&ctx, &mut rng).unwrap();
            seq.push(a);
            local.position = local.position.moved(a, &cfg).unwrap();
        }
        let mut expected = vec![Action::East; 9];
        expected.push(Action::North);
        expected.extend(vec![Action::West; 9]);
        expected.push(Action::North);
        expected.push(Action::East);
        assert_eq!(seq, expected);
    }

    #[test]
    fn coverage_climbs_first() {
        let cfg = small_cfg(1);
        let local = local_at(&cfg, LatticePos::new(5, 0, 0));
        let ctx = PlanContext {
            cfg: &cfg,
            local: &local,
            mask: [true; 6],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(CoveragePlanner::new().act(&ctx, &mut rng).unwrap(), Action::Up);
    }

    #[test]
    fn coverage_stripes_do_not_overlap() {
        let cfg = EnvConfig {
            budget: 60,
            ..small_cfg(2)
        };
        assert_eq!(stripe(0, 2, 10), (0, 5));
        assert_eq!(stripe(1, 2, 10), (5, 10));
        let gt = split_terrain(&cfg, 0.2, 20.0);
        let mut env = Environment::new(cfg, gt, 1).unwrap();
        let mut planner = CoveragePlanner::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut visited = [std::collections::HashSet::new(), std::collections::HashSet::new()];
        while !env.done() {
            let acts: Vec<Action> = (0..2)
                .map(|i| {
                    let ctx = PlanContext {
                        cfg: env.cfg(),
                        local: env.local(i),
                        mask: env.valid_actions(i),
                    };
                    planner.act(&ctx, &mut rng).unwrap()
                })
                .collect();
            env.step(&acts).unwrap();
            for (i, p) in env.global().positions.iter().enumerate() {
                visited[i].insert((p.col, p.row));
            }
        }
        assert!(visited[0].is_disjoint(&visited[1]));
        assert!(visited[0].iter().all(|&(c, _)| c < 5));
        assert!(visited[1].iter().all(|&(c, _)| c >= 5));
    }

    #[test]
    fn greedy_prefers_uncertain_cells() {
        let cfg = small_cfg(1);
        let mut local = local_at(&cfg, LatticePos::new(5, 5, 0));
        let n = cfg.map_size();
        // certain everywhere except east of the agent
        let probs: Vec<f64> = (0..n * n)
            .map(|i| if (i % n) >= 60 && (i % n) < 70 && (i / n) >= 50 && (i / n) < 60 { 0.5 } else { 1.0 })
            .collect();
        local.map = OccupancyGrid::from_probabilities(n, n, cfg.map_resolution, probs).unwrap();
        let ctx = PlanContext {
            cfg: &cfg,
            local: &local,
            mask: [false, true, true, true, true, false],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(GreedyPlanner.act(&ctx, &mut rng).unwrap(), Action::East);
    }

    #[test]
    fn greedy_tie_takes_first_in_order() {
        let cfg = small_cfg(1);
        let local = local_at(&cfg, LatticePos::new(5, 5, 1));
        let mask = [false, true, true, true, true, false];
        let ctx = PlanContext {
            cfg: &cfg,
            local: &local,
            mask,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(GreedyPlanner.act(&ctx, &mut rng).unwrap(), Action::North);
    }

    #[test]
    fn certain_cells_have_no_gain() {
        let w = ImportanceWeights::default();
        assert_eq!(expected_cell_gain(1.0, 0.9, &w), 0.0);
        assert_eq!(expected_cell_gain(0.0, 0.9, &w), 0.0);
        assert!(expected_cell_gain(0.5, 0.9, &w) > 0.0);
    }
}
