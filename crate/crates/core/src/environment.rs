//! The multi-agent mapping mission.
//!
//! Agents move on a 3D lattice of `G x G` horizontal cells (side `r_P`) and a
//! few altitude levels. Every step all agents move at once, each senses the
//! terrain below, measurements are shared with teammates within the
//! communication radius, and the team is rewarded for the relative drop in
//! weighted entropy of the global map.
//!
//! Lattice cell `(col, row)` has its centre at `((col + 0.5) r_P, (row + 0.5) r_P)`
//! metres; `col` grows eastwards and `row` northwards from the southern edge.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

pub use crate::config::EnvConfig;
use crate::error::{Error, Result};
use crate::gridmap::{
    map_entropy, simulate_measurement, GroundTruthMap, KeyedNoise, Measurement, OccupancyGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    North,
    East,
    South,
    West,
    Down,
}

impl Action {
    /// All actions in index order, which is also the planners' tie-break order.
    pub const ALL: [Action; 6] = [
        Action::Up,
        Action::North,
        Action::East,
        Action::South,
        Action::West,
        Action::Down,
    ];

    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// `(d_col, d_row, d_level)`.
    pub fn delta(self) -> (i64, i64, i64) {
        match self {
            Action::Up => (0, 0, 1),
            Action::North => (0, 1, 0),
            Action::East => (1, 0, 0),
            Action::South => (0, -1, 0),
            Action::West => (-1, 0, 0),
            Action::Down => (0, 0, -1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::North => "north",
            Action::East => "east",
            Action::South => "south",
            Action::West => "west",
            Action::Down => "down",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unknown action {s:?}"),
            })
    }
}

/// Validity of each action, indexed by [`Action::index`].
pub type ActionMask = [bool; Action::COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticePos {
    pub col: usize,
    pub row: usize,
    pub level: usize,
}

impl LatticePos {
    pub fn new(col: usize, row: usize, level: usize) -> Self {
        Self { col, row, level }
    }

    pub fn meters(&self, cfg: &EnvConfig) -> [f64; 3] {
        [
            (self.col as f64 + 0.5) * cfg.planning_resolution,
            (self.row as f64 + 0.5) * cfg.planning_resolution,
            cfg.altitude(self.level),
        ]
    }

    pub fn same_cell_2d(&self, other: &LatticePos) -> bool {
        self.col == other.col && self.row == other.row
    }

    /// Target of `action`, or `None` if it leaves the lattice box.
    pub fn moved(&self, action: Action, cfg: &EnvConfig) -> Option<LatticePos> {
        let (dc, dr, dl) = action.delta();
        let g = cfg.lattice_size() as i64;
        let c = self.col as i64 + dc;
        let r = self.row as i64 + dr;
        let l = self.level as i64 + dl;
        (c >= 0 && c < g && r >= 0 && r < g && l >= 0 && l < cfg.num_levels() as i64)
            .then(|| LatticePos::new(c as usize, r as usize, l as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub map: OccupancyGrid,
    pub positions: Vec<LatticePos>,
    pub budget: usize,
    /// Steps taken so far; the initial measurement is step 0.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLocalState {
    pub id: usize,
    pub num_agents: usize,
    pub map: OccupancyGrid,
    pub position: LatticePos,
    /// Last-known position of every agent, own entry current.
    pub known_positions: Vec<LatticePos>,
    pub budget: usize,
    pub last_measurement: Option<Measurement>,
    /// Senders heard in the latest exchange.
    pub heard: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommMessage {
    pub sender: usize,
    pub position: [f64; 3],
    pub measurement: Measurement,
}

/// Terrain split by a straight line at `angle`: cells whose centre satisfies
/// `x cos(angle) + y sin(angle) >= offset` (metres) are interesting.
pub fn split_terrain(cfg: &EnvConfig, angle: f64, offset: f64) -> GroundTruthMap {
    let n = cfg.map_size();
    let r = cfg.map_resolution;
    let (s, c) = angle.sin_cos();
    let mut cells = vec![0u8; n * n];
    for y in 0..n {
        let yy = (y as f64 + 0.5) * r * s;
        for x in 0..n {
            let proj = (x as f64 + 0.5) * r * c + yy;
            cells[y * n + x] = u8::from(proj >= offset);
        }
    }
    GroundTruthMap::new(n, n, r, cells).expect("square map of positive size")
}

pub const MIN_INTERESTING_FRACTION: f64 = 0.3;
pub const MAX_INTERESTING_FRACTION: f64 = 0.6;

/// Random half-plane terrain whose interesting fraction lies in `[0.3, 0.6]`.
pub fn generate_terrain<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig) -> GroundTruthMap {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let target = rng.random_range(MIN_INTERESTING_FRACTION..=MAX_INTERESTING_FRACTION);
    let n = cfg.map_size();
    let r = cfg.map_resolution;
    let (s, c) = angle.sin_cos();
    let proj: Vec<f64> = (0..n * n)
        .map(|i| ((i % n) as f64 + 0.5) * r * c + ((i / n) as f64 + 0.5) * r * s)
        .collect();
    let total = proj.len();
    let count_at = |offset: f64| proj.iter().filter(|&&p| p >= offset).count();
    // bisection for the offset whose interesting share is closest to `target`
    let (mut lo, mut hi) = proj
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
    let want = (target * total as f64).round() as usize;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if count_at(mid) >= want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lo_count = count_at(lo);
    let hi_count = count_at(hi);
    let fits = |k: usize| {
        let f = k as f64 / total as f64;
        (MIN_INTERESTING_FRACTION..=MAX_INTERESTING_FRACTION).contains(&f)
    };
    let offset = if fits(lo_count) && (lo_count.abs_diff(want) <= hi_count.abs_diff(want) || !fits(hi_count)) {
        lo
    } else {
        hi
    };
    split_terrain(cfg, angle, offset)
}

/// Column of agent `k` on the southern edge.
pub fn initial_column(k: usize, num_agents: usize, columns: usize) -> usize {
    (2 * k + 1) * columns / (2 * num_agents)
}

/// Inboxes: `inbox[k]` lists, in id order, the agents within 3D distance
/// `radius` of agent `k`.
pub fn exchange_messages(positions: &[[f64; 3]], radius: f64) -> Vec<Vec<usize>> {
    positions
        .iter()
        .enumerate()
        .map(|(k, pk)| {
            positions
                .iter()
                .enumerate()
                .filter(|&(i, pi)| {
                    i != k && {
                        let d2: f64 = pi.iter().zip(pk).map(|(a, b)| (a - b) * (a - b)).sum();
                        d2.sqrt() <= radius
                    }
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Relative entropy reduction `alpha (before - after) / before + beta`;
/// `beta` alone when `before` is not positive.
pub fn reward(before: f64, after: f64, alpha: f64, beta: f64) -> f64 {
    if before <= 0.0 {
        return beta;
    }
    alpha * (before - after) / before + beta
}

/// Actions of `agent` that stay inside the lattice and do not enter another
/// agent's current 2D cell.
pub fn valid_actions(positions: &[LatticePos], agent: usize, cfg: &EnvConfig) -> ActionMask {
    let here = positions[agent];
    let mut mask = [false; Action::COUNT];
    for a in Action::ALL {
        mask[a.index()] = match here.moved(a, cfg) {
            Some(t) => !positions
                .iter()
                .enumerate()
                .any(|(j, p)| j != agent && p.same_cell_2d(&t)),
            None => false,
        };
    }
    mask
}

/// One row of the episode log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub agent: usize,
    pub position: [f64; 3],
    /// `None` for the initial placement.
    pub action: Option<Action>,
    pub reward: f64,
    pub global_entropy: f64,
}

pub const EPISODE_LOG_HEADER: &str = "step,agent,x,y,z,action,reward,global_entropy";

pub fn write_episode_log<W: Write>(w: &mut W, rows: &[LogRow]) -> std::io::Result<()> {
    writeln!(w, "{EPISODE_LOG_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.step,
            r.agent,
            r.position[0],
            r.position[1],
            r.position[2],
            r.action.map_or("none", |a| a.name()),
            r.reward,
            r.global_entropy
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// Agents that held position because a lower-id agent claimed their target.
    pub held: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    terrain: GroundTruthMap,
    noise_seed: u64,
    global: GlobalState,
    locals: Vec<AgentLocalState>,
    entropy: f64,
    log: Vec<LogRow>,
}

impl Environment {
    /// Places the agents, takes the initial measurements and exchanges them.
    pub fn new(cfg: EnvConfig, terrain: GroundTruthMap, noise_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.map_size();
        if terrain.width() != n || terrain.height() != n {
            return Err(Error::Config(format!(
                "terrain is {} x {} cells, config implies {n} x {n}",
                terrain.width(),
                terrain.height()
            )));
        }
        let g = cfg.lattice_size();
        let na = cfg.num_agents;
        let positions: Vec<LatticePos> = (0..na)
            .map(|k| LatticePos::new(initial_column(k, na, g), 0, 0))
            .collect();
        let blank = OccupancyGrid::uniform(n, n, cfg.map_resolution);
        let locals = (0..na)
            .map(|id| AgentLocalState {
                id,
                num_agents: na,
                map: blank.clone(),
                position: positions[id],
                known_positions: positions.clone(),
                budget: cfg.budget,
                last_measurement: None,
                heard: Vec::new(),
            })
            .collect();
        let global = GlobalState {
            map: blank,
            positions,
            budget: cfg.budget,
            step: 0,
        };
        let mut env = Self {
            cfg,
            terrain,
            noise_seed,
            global,
            locals,
            entropy: 0.0,
            log: Vec::new(),
        };
        env.entropy = env.current_entropy()?;
        env.sense_and_share()?;
        env.entropy = env.current_entropy()?;
        for (agent, p) in env.global.positions.iter().enumerate() {
            env.log.push(LogRow {
                step: 0,
                agent,
                position: p.meters(&env.cfg),
                action: None,
                reward: 0.0,
                global_entropy: env.entropy,
            });
        }
        Ok(env)
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn terrain(&self) -> &GroundTruthMap {
        &self.terrain
    }

    pub fn global(&self) -> &GlobalState {
        &self.global
    }

    pub fn locals(&self) -> &[AgentLocalState] {
        &self.locals
    }

    pub fn local(&self, agent: usize) -> &AgentLocalState {
        &self.locals[agent]
    }

    pub fn num_agents(&self) -> usize {
        self.global.positions.len()
    }

    pub fn done(&self) -> bool {
        self.global.budget == 0
    }

    /// Weighted entropy of the global map.
    pub fn global_entropy(&self) -> f64 {
        self.entropy
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn valid_actions(&self, agent: usize) -> ActionMask {
        valid_actions(&self.global.positions, agent, &self.cfg)
    }

    fn current_entropy(&self) -> Result<f64> {
        map_entropy(&self.global.map, &self.cfg.weights, None)
    }

    fn sense_and_share(&mut self) -> Result<()> {
        let cfg = &self.cfg;
        let t = self.global.step;
        let mut measurements = Vec::with_capacity(self.global.positions.len());
        for (agent, p) in self.global.positions.iter().enumerate() {
            let mut noise = KeyedNoise::new(self.noise_seed, t, agent);
            measurements.push(simulate_measurement(
                &self.terrain,
                p.meters(cfg),
                &cfg.sensor,
                cfg.footprint_factor,
                &mut noise,
                agent,
                t,
            )?);
        }
        for m in &measurements {
            self.global.map.fuse(m)?;
        }
        let meters: Vec<[f64; 3]> = measurements.iter().map(|m| m.position).collect();
        let inboxes = exchange_messages(&meters, cfg.comm_radius);
        for (k, inbox) in inboxes.into_iter().enumerate() {
            let local = &mut self.locals[k];
            local.position = self.global.positions[k];
            local.known_positions[k] = local.position;
            for (i, m) in measurements.iter().enumerate() {
                if i == k || inbox.contains(&i) {
                    local.map.fuse(m)?;
                }
            }
            for &i in &inbox {
                local.known_positions[i] = self.global.positions[i];
            }
            local.heard = inbox;
            local.budget = self.global.budget;
        }
        for (local, m) in self.locals.iter_mut().zip(measurements) {
            local.last_measurement = Some(m);
        }
        Ok(())
    }

    /// Messages agent `k` received in the latest exchange.
    pub fn inbox(&self, k: usize) -> Vec<CommMessage> {
        self.locals[k]
            .heard
            .iter()
            .map(|&i| {
                let m = self.locals[i].last_measurement.clone().expect("measured at every step");
                CommMessage {
                    sender: i,
                    position: m.position,
                    measurement: m,
                }
            })
            .collect()
    }

    /// Advances the mission by one joint action.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        let na = self.num_agents();
        if actions.len() != na {
            return Err(Error::Contract(format!(
                "{} actions for {na} agents",
                actions.len()
            )));
        }
        if self.done() {
            return Err(Error::Contract("mission budget exhausted".into()));
        }
        let current = self.global.positions.clone();
        for (agent, &a) in actions.iter().enumerate() {
            let mask = valid_actions(&current, agent, &self.cfg);
            if !mask.iter().any(|&m| m) {
                return Err(Error::Contract(format!("agent {agent} has no valid action")));
            }
            if !mask[a.index()] {
                return Err(Error::RejectedStep {
                    agent,
                    reason: format!("action {a} is not valid at {:?}", current[agent]),
                });
            }
        }
        let mut next = current.clone();
        let mut held = Vec::new();
        for (agent, &a) in actions.iter().enumerate() {
            let target = current[agent].moved(a, &self.cfg).expect("validated");
            if next[..agent].iter().any(|p| p.same_cell_2d(&target)) {
                held.push(agent);
            } else {
                next[agent] = target;
            }
        }
        self.global.positions = next;
        self.global.step += 1;
        self.global.budget -= 1;
        let before = self.entropy;
        self.sense_and_share()?;
        let after = self.current_entropy()?;
        self.entropy = after;
        let r = reward(before, after, self.cfg.reward_alpha, self.cfg.reward_beta);
        for (agent, p) in self.global.positions.iter().enumerate() {
            self.log.push(LogRow {
                step: self.global.step,
                agent,
                position: p.meters(&self.cfg),
                action: Some(actions[agent]),
                reward: r,
                global_entropy: after,
            });
        }
        Ok(StepOutcome {
            reward: r,
            done: self.done(),
            entropy_before: before,
            entropy_after: after,
            held,
        })
    }
}
