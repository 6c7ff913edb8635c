//! Run configuration and its plain-text `key = value` format.
//!
//! A config file must set every key exactly once; blank lines and text after
//! `#` are ignored. List values are comma separated, booleans are `on`/`off`
//! and an unbounded communication radius is written `inf`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gridmap::{ImportanceWeights, SensorModel};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub terrain_side: f64,
    pub map_resolution: f64,
    pub planning_resolution: f64,
    pub min_altitude: f64,
    pub max_altitude: f64,
    pub altitude_step: f64,
    pub num_agents: usize,
    pub budget: usize,
    pub comm_radius: f64,
    pub sensor: SensorModel,
    pub weights: ImportanceWeights,
    pub reward_alpha: f64,
    pub reward_beta: f64,
    pub footprint_factor: f64,
    pub coverage_altitude: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            terrain_side: 50.0,
            map_resolution: 0.1,
            planning_resolution: 5.0,
            min_altitude: 5.0,
            max_altitude: 15.0,
            altitude_step: 5.0,
            num_agents: 4,
            budget: 15,
            comm_radius: 25.0,
            sensor: SensorModel::default(),
            weights: ImportanceWeights::default(),
            reward_alpha: 1.0,
            reward_beta: 0.0,
            footprint_factor: 1.0,
            coverage_altitude: 10.0,
        }
    }
}

fn integer_ratio(a: f64, b: f64, what: &str) -> Result<usize> {
    let r = a / b;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-6 {
        return Err(Error::Config(format!("{what}: {a} is not a multiple of {b}")));
    }
    Ok(n as usize)
}

impl EnvConfig {
    /// Planning lattice side `G`.
    pub fn lattice_size(&self) -> usize {
        (self.terrain_side / self.planning_resolution).round() as usize
    }

    /// Map side in cells.
    pub fn map_size(&self) -> usize {
        (self.terrain_side / self.map_resolution).round() as usize
    }

    /// Map cells per lattice cell along one axis.
    pub fn pool_factor(&self) -> usize {
        (self.planning_resolution / self.map_resolution).round() as usize
    }

    pub fn num_levels(&self) -> usize {
        ((self.max_altitude - self.min_altitude) / self.altitude_step).round() as usize + 1
    }

    pub fn altitude(&self, level: usize) -> f64 {
        self.min_altitude + level as f64 * self.altitude_step
    }

    pub fn level_of(&self, altitude: f64) -> Option<usize> {
        let l = (altitude - self.min_altitude) / self.altitude_step;
        let r = l.round();
        ((l - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < self.num_levels()).then_some(r as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.terrain_side", self.terrain_side),
            ("env.map_resolution", self.map_resolution),
            ("env.planning_resolution", self.planning_resolution),
            ("env.min_altitude", self.min_altitude),
            ("env.altitude_step", self.altitude_step),
            ("env.footprint_factor", self.footprint_factor),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        integer_ratio(self.terrain_side, self.planning_resolution, "env.terrain_side")?;
        integer_ratio(self.terrain_side, self.map_resolution, "env.terrain_side")?;
        integer_ratio(self.planning_resolution, self.map_resolution, "env.planning_resolution")?;
        if self.max_altitude < self.min_altitude {
            return Err(Error::Config("env.max_altitude is below env.min_altitude".into()));
        }
        integer_ratio(
            self.max_altitude - self.min_altitude + self.altitude_step,
            self.altitude_step,
            "altitude range",
        )?;
        for level in 0..self.num_levels() {
            self.sensor.accuracy(self.altitude(level))?;
        }
        if self.num_agents == 0 {
            return Err(Error::Config("env.num_agents must be at least 1".into()));
        }
        if self.num_agents > self.lattice_size() {
            return Err(Error::Config(format!(
                "{} agents do not fit on the {}-column southern edge",
                self.num_agents,
                self.lattice_size()
            )));
        }
        if self.budget == 0 {
            return Err(Error::Config("env.budget must be at least 1".into()));
        }
        if !(self.comm_radius >= 0.0) {
            return Err(Error::Config("env.comm_radius must be non-negative".into()));
        }
        if !self.reward_alpha.is_finite() || !self.reward_beta.is_finite() {
            return Err(Error::Config("reward coefficients must be finite".into()));
        }
        if self.level_of(self.coverage_altitude).is_none() {
            return Err(Error::Config(format!(
                "env.coverage_altitude {} is not a flight altitude",
                self.coverage_altitude
            )));
        }
        Ok(())
    }
}

/// Which input planes the networks receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureToggles {
    pub position_map: bool,
    pub belief_map: bool,
    pub entropy_map: bool,
    pub measurement_entropy: bool,
    pub footprint_map: bool,
    pub agent_id: bool,
    pub budget: bool,
}

impl Default for FeatureToggles {
    fn default() -> Self {
        Self {
            position_map: true,
            belief_map: true,
            entropy_map: true,
            measurement_entropy: true,
            footprint_map: true,
            agent_id: true,
            budget: true,
        }
    }
}

impl FeatureToggles {
    pub const NAMES: [&'static str; 7] = [
        "position_map",
        "belief_map",
        "entropy_map",
        "measurement_entropy",
        "footprint_map",
        "agent_id",
        "budget",
    ];

    pub fn get(&self, name: &str) -> Option<bool> {
        Some(match name {
            "position_map" => self.position_map,
            "belief_map" => self.belief_map,
            "entropy_map" => self.entropy_map,
            "measurement_entropy" => self.measurement_entropy,
            "footprint_map" => self.footprint_map,
            "agent_id" => self.agent_id,
            "budget" => self.budget,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, on: bool) -> Result<()> {
        let slot = match name {
            "position_map" => &mut self.position_map,
            "belief_map" => &mut self.belief_map,
            "entropy_map" => &mut self.entropy_map,
            "measurement_entropy" => &mut self.measurement_entropy,
            "footprint_map" => &mut self.footprint_map,
            "agent_id" => &mut self.agent_id,
            "budget" => &mut self.budget,
            _ => return Err(Error::Usage(format!("unknown feature plane {name:?}"))),
        };
        *slot = on;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub conv_channels: Vec<usize>,
    pub conv_strides: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![16, 32, 32],
            conv_strides: vec![1, 1, 2],
            hidden: vec![128, 64],
        }
    }
}

/// Credit-assignment scheme used to train the actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Counterfactual baseline with other agents' actions in the critic input.
    Coma,
    /// Advantage against a separately trained state-value network.
    CentralQv,
    /// Counterfactual baseline, critic blind to other agents' actions.
    ActorIndependent,
    /// Counterfactual baseline, critic sees only the actor's inputs.
    Decentralised,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Coma,
        Variant::CentralQv,
        Variant::ActorIndependent,
        Variant::Decentralised,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Coma => "coma",
            Variant::CentralQv => "central-qv",
            Variant::ActorIndependent => "actor-independent",
            Variant::Decentralised => "decentralised",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown training variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub missions: usize,
    pub rollout_block: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub target_interval: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_missions: usize,
    /// Count one interaction per agent decision rather than per env step.
    pub count_agent_decisions: bool,
    pub grad_clip: f64,
    /// Write a checkpoint every this many blocks (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Coma,
            missions: 10_000,
            rollout_block: 3000,
            epochs: 5,
            batch_size: 600,
            actor_lr: 1e-5,
            critic_lr: 1e-4,
            lambda: 0.8,
            gamma: 0.99,
            target_interval: 30_000,
            eps_start: 0.5,
            eps_end: 0.02,
            eps_anneal_missions: 10_000,
            count_agent_decisions: true,
            grad_clip: 10.0,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    /// Exploration mixture weight after `missions_done` missions.
    pub fn epsilon(&self, missions_done: usize) -> f64 {
        if self.eps_anneal_missions == 0 {
            return self.eps_end;
        }
        let frac = (missions_done as f64 / self.eps_anneal_missions as f64).min(1.0);
        self.eps_start * (1.0 - frac) + self.eps_end * frac
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("train.missions", self.missions),
            ("train.rollout_block", self.rollout_block),
            ("train.epochs", self.epochs),
            ("train.batch_size", self.batch_size),
            ("train.target_interval", self.target_interval),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        for (k, v) in [
            ("train.actor_lr", self.actor_lr),
            ("train.critic_lr", self.critic_lr),
            ("train.grad_clip", self.grad_clip),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [
            ("train.lambda", self.lambda),
            ("train.gamma", self.gamma),
            ("train.eps_start", self.eps_start),
            ("train.eps_end", self.eps_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{k} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub env: EnvConfig,
    pub features: FeatureToggles,
    pub net: NetConfig,
    pub train: TrainConfig,
}

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn fmt_bool(b: bool) -> String {
    if b { "on" } else { "off" }.to_string()
}

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Config(format!("{key}: expected a number, got {s:?}"))),
    }
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {s:?}")))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on or off, got {s:?}"))),
    }
}

fn parse_list<T>(key: &str, s: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(|x| item(key, x.trim())).collect()
}

impl Config {
    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let e = &self.env;
        let f = &self.features;
        let n = &self.net;
        let t = &self.train;
        let (alts, accs): (Vec<f64>, Vec<f64>) = e.sensor.entries().iter().copied().unzip();
        vec![
            ("env.terrain_side", fmt_f64(e.terrain_side)),
            ("env.map_resolution", fmt_f64(e.map_resolution)),
            ("env.planning_resolution", fmt_f64(e.planning_resolution)),
            ("env.min_altitude", fmt_f64(e.min_altitude)),
            ("env.max_altitude", fmt_f64(e.max_altitude)),
            ("env.altitude_step", fmt_f64(e.altitude_step)),
            ("env.num_agents", e.num_agents.to_string()),
            ("env.budget", e.budget.to_string()),
            ("env.comm_radius", fmt_f64(e.comm_radius)),
            ("env.sensor_altitudes", fmt_list(&alts)),
            ("env.sensor_accuracies", fmt_list(&accs)),
            ("env.weight_interesting", fmt_f64(e.weights.interesting())),
            ("env.reward_alpha", fmt_f64(e.reward_alpha)),
            ("env.reward_beta", fmt_f64(e.reward_beta)),
            ("env.footprint_factor", fmt_f64(e.footprint_factor)),
            ("env.coverage_altitude", fmt_f64(e.coverage_altitude)),
            ("features.position_map", fmt_bool(f.position_map)),
            ("features.belief_map", fmt_bool(f.belief_map)),
            ("features.entropy_map", fmt_bool(f.entropy_map)),
            ("features.measurement_entropy", fmt_bool(f.measurement_entropy)),
            ("features.footprint_map", fmt_bool(f.footprint_map)),
            ("features.agent_id", fmt_bool(f.agent_id)),
            ("features.budget", fmt_bool(f.budget)),
            ("net.conv_channels", fmt_list(&n.conv_channels)),
            ("net.conv_strides", fmt_list(&n.conv_strides)),
            ("net.hidden", fmt_list(&n.hidden)),
            ("train.variant", t.variant.to_string()),
            ("train.missions", t.missions.to_string()),
            ("train.rollout_block", t.rollout_block.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.actor_lr", fmt_f64(t.actor_lr)),
            ("train.critic_lr", fmt_f64(t.critic_lr)),
            ("train.lambda", fmt_f64(t.lambda)),
            ("train.gamma", fmt_f64(t.gamma)),
            ("train.target_interval", t.target_interval.to_string()),
            ("train.eps_start", fmt_f64(t.eps_start)),
            ("train.eps_end", fmt_f64(t.eps_end)),
            ("train.eps_anneal_missions", t.eps_anneal_missions.to_string()),
            ("train.count_agent_decisions", fmt_bool(t.count_agent_decisions)),
            ("train.grad_clip", fmt_f64(t.grad_clip)),
            ("train.checkpoint_every", t.checkpoint_every.to_string()),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Config::default().entries().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one key. Cross-field consistency is checked by [`Config::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let e = &mut self.env;
        let t = &mut self.train;
        match key {
            "env.terrain_side" => e.terrain_side = parse_f64(key, v)?,
            "env.map_resolution" => e.map_resolution = parse_f64(key, v)?,
            "env.planning_resolution" => e.planning_resolution = parse_f64(key, v)?,
            "env.min_altitude" => e.min_altitude = parse_f64(key, v)?,
            "env.max_altitude" => e.max_altitude = parse_f64(key, v)?,
            "env.altitude_step" => e.altitude_step = parse_f64(key, v)?,
            "env.num_agents" => e.num_agents = parse_usize(key, v)?,
            "env.budget" => e.budget = parse_usize(key, v)?,
            "env.comm_radius" => e.comm_radius = parse_f64(key, v)?,
            "env.sensor_altitudes" | "env.sensor_accuracies" => {
                let (alts, accs): (Vec<f64>, Vec<f64>) = e.sensor.entries().iter().copied().unzip();
                e.sensor = if key == "env.sensor_altitudes" {
                    parse_sensor(v, &fmt_list(&accs))?
                } else {
                    parse_sensor(&fmt_list(&alts), v)?
                };
            }
            "env.weight_interesting" => {
                e.weights = ImportanceWeights::from_interesting(parse_f64(key, v)?)?
            }
            "env.reward_alpha" => e.reward_alpha = parse_f64(key, v)?,
            "env.reward_beta" => e.reward_beta = parse_f64(key, v)?,
            "env.footprint_factor" => e.footprint_factor = parse_f64(key, v)?,
            "env.coverage_altitude" => e.coverage_altitude = parse_f64(key, v)?,
            "net.conv_channels" => self.net.conv_channels = parse_list(key, v, parse_usize)?,
            "net.conv_strides" => self.net.conv_strides = parse_list(key, v, parse_usize)?,
            "net.hidden" => self.net.hidden = parse_list(key, v, parse_usize)?,
            "train.variant" => t.variant = v.parse()?,
            "train.missions" => t.missions = parse_usize(key, v)?,
            "train.rollout_block" => t.rollout_block = parse_usize(key, v)?,
            "train.epochs" => t.epochs = parse_usize(key, v)?,
            "train.batch_size" => t.batch_size = parse_usize(key, v)?,
            "train.actor_lr" => t.actor_lr = parse_f64(key, v)?,
            "train.critic_lr" => t.critic_lr = parse_f64(key, v)?,
            "train.lambda" => t.lambda = parse_f64(key, v)?,
            "train.gamma" => t.gamma = parse_f64(key, v)?,
            "train.target_interval" => t.target_interval = parse_usize(key, v)?,
            "train.eps_start" => t.eps_start = parse_f64(key, v)?,
            "train.eps_end" => t.eps_end = parse_f64(key, v)?,
            "train.eps_anneal_missions" => t.eps_anneal_missions = parse_usize(key, v)?,
            "train.count_agent_decisions" => t.count_agent_decisions = parse_bool(key, v)?,
            "train.grad_clip" => t.grad_clip = parse_f64(key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = parse_usize(key, v)?,
            _ => match key.strip_prefix("features.") {
                Some(name) if self.features.get(name).is_some() => {
                    self.features.set(name, parse_bool(key, v)?)?
                }
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            },
        }
        Ok(())
    }

    /// Parses a complete config file. Every key must appear exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let keys = Config::keys();
        for (i, (k, _)) in pairs.iter().enumerate() {
            if !keys.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown config key {k:?}")));
            }
            if pairs[..i].iter().any(|(other, _)| other == k) {
                return Err(Error::Config(format!("config key {k:?} set twice")));
            }
        }
        if let Some(missing) = keys.iter().find(|k| !pairs.iter().any(|(p, _)| p == *k)) {
            return Err(Error::Config(format!("missing config key {missing:?}")));
        }
        // altitudes before accuracies so the pairing is by position
        pairs.sort_by_key(|(k, _)| keys.iter().position(|x| x == k));
        let mut cfg = Config::default();
        let sensor_alts = pairs.iter().find(|(k, _)| k == "env.sensor_altitudes").map(|p| p.1.clone());
        let sensor_accs = pairs.iter().find(|(k, _)| k == "env.sensor_accuracies").map(|p| p.1.clone());
        for (k, v) in &pairs {
            if k.starts_with("env.sensor_") {
                continue;
            }
            cfg.set(k, v)?;
        }
        if let (Some(alts), Some(accs)) = (sensor_alts, sensor_accs) {
            cfg.env.sensor = parse_sensor(&alts, &accs)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        let n = &self.net;
        if n.conv_channels.is_empty() || n.conv_channels.len() != n.conv_strides.len() {
            return Err(Error::Config(
                "net.conv_channels and net.conv_strides must be non-empty and equally long".into(),
            ));
        }
        if n.conv_channels.iter().chain(&n.conv_strides).chain(&n.hidden).any(|&x| x == 0) {
            return Err(Error::Config("network sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Builds a sensor model from the two comma-separated config lists.
pub fn parse_sensor(altitudes: &str, accuracies: &str) -> Result<SensorModel> {
    let alts = parse_list("env.sensor_altitudes", altitudes, parse_f64)?;
    let accs = parse_list("env.sensor_accuracies", accuracies, parse_f64)?;
    if alts.len() != accs.len() {
        return Err(Error::Config(format!(
            "{} sensor altitudes but {} accuracies",
            alts.len(),
            accs.len()
        )));
    }
    SensorModel::new(alts.into_iter().zip(accs).collect())
}
