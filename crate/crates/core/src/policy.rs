//! Input planes and the actor/critic networks.
//!
//! Every plane is a `G x G` grid at planning resolution, indexed
//! `row * G + col` with row 0 on the southern edge. Fine-resolution maps are
//! reduced by averaging each `r_P / r_M` block of per-cell values.
//!
//! Actor planes, in order (each can be switched off in the config):
//! position map centred on the agent, local belief, local weighted entropy,
//! weighted entropy of the agent's latest measurement, footprints of the
//! agent and of the teammates it heard, agent id `i / N`, budget `b / B`.
//! A critic may add the global position map, global belief, global entropy,
//! union of all footprints and, for each other agent, one plane per action
//! marking that agent's cell if it chose the action.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ipp_tensor::checkpoint::{load_into, meta_get, read_checkpoint, write_checkpoint, Metadata};
use ipp_tensor::{masked_bounded_softmax, Conv2d, Graph, Linear, ParamStore, Tensor, Var};
use rand::{Rng, RngCore, SeedableRng};

use crate::config::{FeatureToggles, NetConfig};
use crate::environment::{Action, ActionMask, AgentLocalState, EnvConfig, GlobalState, LatticePos};
use crate::error::{Error, Result};
use crate::gridmap::{footprint, weighted_entropy_unchecked, CellRect, ImportanceWeights, OccupancyGrid, ValueCache};
use crate::planners::{PlanContext, Planner};

/// What the critic sees besides the actor planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticInput {
    /// Only the actor planes.
    Local,
    /// Actor planes and global state planes.
    Global,
    /// Global planes plus the other agents' actions.
    GlobalWithActions,
}

impl CriticInput {
    pub fn name(&self) -> &'static str {
        match self {
            CriticInput::Local => "local",
            CriticInput::Global => "global",
            CriticInput::GlobalWithActions => "global-actions",
        }
    }

    fn from_name(s: &str) -> Result<Self> {
        [CriticInput::Local, CriticInput::Global, CriticInput::GlobalWithActions]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown critic input {s:?}")))
    }
}

pub const GLOBAL_PLANES: [&str; 4] = ["global_position", "global_belief", "global_entropy", "global_footprints"];

pub fn actor_plane_names(toggles: &FeatureToggles) -> Vec<String> {
    FeatureToggles::NAMES
        .iter()
        .filter(|n| toggles.get(n) == Some(true))
        .map(|n| n.to_string())
        .collect()
}

pub fn critic_plane_names(toggles: &FeatureToggles, input: CriticInput, num_agents: usize) -> Vec<String> {
    let mut names = actor_plane_names(toggles);
    if input != CriticInput::Local {
        names.extend(GLOBAL_PLANES.iter().map(|s| s.to_string()));
    }
    if input == CriticInput::GlobalWithActions {
        for k in 0..num_agents.saturating_sub(1) {
            for a in Action::ALL {
                names.push(format!("other{k}_{a}"));
            }
        }
    }
    names
}

/// Planes of one sample, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub names: Vec<String>,
    pub grid: usize,
    pub data: Vec<f64>,
}

impl FeatureStack {
    pub fn channels(&self) -> usize {
        self.names.len()
    }

    pub fn plane(&self, name: &str) -> Option<&[f64]> {
        let gg = self.grid * self.grid;
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.data[i * gg..(i + 1) * gg])
    }
}

fn check_divisible(cfg: &EnvConfig, map: &OccupancyGrid) -> Result<usize> {
    let f = cfg.pool_factor();
    let g = cfg.lattice_size();
    if map.width() != f * g || map.height() != f * g {
        return Err(Error::Config(format!(
            "a {} x {} map does not pool to a {g} x {g} lattice with factor {f}",
            map.width(),
            map.height()
        )));
    }
    Ok(f)
}

/// Block means of the belief and of the weighted entropy.
pub fn pool_map(map: &OccupancyGrid, w: &ImportanceWeights, factor: usize) -> (Vec<f64>, Vec<f64>) {
    let g = map.width() / factor;
    let mut belief = vec![0.0; g * g];
    let mut entropy = vec![0.0; g * g];
    let mut cache = ValueCache::new(|p| weighted_entropy_unchecked(p, w));
    let probs = map.probabilities();
    for y in 0..g * factor {
        let row = &probs[y * map.width()..(y + 1) * map.width()];
        let base = (y / factor) * g;
        for (cx, chunk) in row.chunks(factor).enumerate() {
            let mut pb = 0.0;
            let mut pe = 0.0;
            for &p in chunk {
                pb += p;
                pe += cache.get(p);
            }
            belief[base + cx] += pb;
            entropy[base + cx] += pe;
        }
    }
    let norm = 1.0 / (factor * factor) as f64;
    belief.iter_mut().for_each(|v| *v *= norm);
    entropy.iter_mut().for_each(|v| *v *= norm);
    (belief, entropy)
}

/// Adds the fraction of each coarse cell covered by `rect` into `plane`.
fn paint_rect(plane: &mut [f64], rect: &CellRect, factor: usize, g: usize) {
    let norm = 1.0 / (factor * factor) as f64;
    let (x1, y1) = (rect.x0 + rect.w, rect.y0 + rect.h);
    for cy in rect.y0 / factor..=((y1 - 1) / factor).min(g - 1) {
        let oy = (y1.min((cy + 1) * factor)).saturating_sub(rect.y0.max(cy * factor));
        for cx in rect.x0 / factor..=((x1 - 1) / factor).min(g - 1) {
            let ox = (x1.min((cx + 1) * factor)).saturating_sub(rect.x0.max(cx * factor));
            plane[cy * g + cx] += (ox * oy) as f64 * norm;
        }
    }
}

fn union_plane(rects: &[CellRect], factor: usize, g: usize) -> Vec<f64> {
    // exact union coverage via a coarse-cell-local fine mask only where rects overlap
    let mut plane = vec![0.0; g * g];
    if rects.len() == 1 {
        paint_rect(&mut plane, &rects[0], factor, g);
        return plane;
    }
    let norm = 1.0 / (factor * factor) as f64;
    for cy in 0..g {
        for cx in 0..g {
            let cell = CellRect {
                x0: cx * factor,
                y0: cy * factor,
                w: factor,
                h: factor,
            };
            let hits: Vec<CellRect> = rects.iter().filter_map(|r| intersect(r, &cell)).collect();
            plane[cy * g + cx] = match hits.len() {
                0 => 0.0,
                1 => hits[0].area() as f64 * norm,
                _ => {
                    let mut covered = vec![false; factor * factor];
                    for h in &hits {
                        for (x, y) in h.cells() {
                            covered[(y - cell.y0) * factor + (x - cell.x0)] = true;
                        }
                    }
                    covered.iter().filter(|&&c| c).count() as f64 * norm
                }
            };
        }
    }
    plane
}

fn intersect(a: &CellRect, b: &CellRect) -> Option<CellRect> {
    let x0 = a.x0.max(b.x0);
    let y0 = a.y0.max(b.y0);
    let x1 = (a.x0 + a.w).min(b.x0 + b.w);
    let y1 = (a.y0 + a.h).min(b.y0 + b.h);
    (x1 > x0 && y1 > y0).then(|| CellRect {
        x0,
        y0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

fn footprint_of(cfg: &EnvConfig, p: &LatticePos) -> Result<CellRect> {
    let n = cfg.map_size();
    footprint(p.meters(cfg), cfg.footprint_factor, n, n, cfg.map_resolution)
}

/// Position plane centred on `centre`: out-of-map cells hold -1, agents
/// hold altitude / max altitude.
fn centred_positions(cfg: &EnvConfig, centre: &LatticePos, agents: &[LatticePos]) -> Vec<f64> {
    let g = cfg.lattice_size() as i64;
    let half = g / 2;
    let mut plane = vec![0.0; (g * g) as usize];
    for v in 0..g {
        for u in 0..g {
            let c = centre.col as i64 + u - half;
            let r = centre.row as i64 + v - half;
            if c < 0 || c >= g || r < 0 || r >= g {
                plane[(v * g + u) as usize] = -1.0;
            }
        }
    }
    let mut mark = |p: &LatticePos| {
        let u = p.col as i64 - centre.col as i64 + half;
        let v = p.row as i64 - centre.row as i64 + half;
        if (0..g).contains(&u) && (0..g).contains(&v) {
            plane[(v * g + u) as usize] = cfg.altitude(p.level) / cfg.max_altitude;
        }
    };
    for p in agents {
        mark(p);
    }
    // own marker last so a stale teammate entry never hides it
    mark(centre);
    plane
}

fn absolute_positions(cfg: &EnvConfig, agents: &[LatticePos]) -> Vec<f64> {
    let g = cfg.lattice_size();
    let mut plane = vec![0.0; g * g];
    for p in agents {
        plane[p.row * g + p.col] = cfg.altitude(p.level) / cfg.max_altitude;
    }
    plane
}

/// The actor's input planes for one agent.
pub fn build_actor_features(
    local: &AgentLocalState,
    cfg: &EnvConfig,
    toggles: &FeatureToggles,
) -> Result<FeatureStack> {
    let factor = check_divisible(cfg, &local.map)?;
    let g = cfg.lattice_size();
    let gg = g * g;
    let names = actor_plane_names(toggles);
    let mut data = Vec::with_capacity(names.len() * gg);
    let pooled = (toggles.belief_map || toggles.entropy_map).then(|| pool_map(&local.map, &cfg.weights, factor));
    for name in &names {
        match name.as_str() {
            "position_map" => {
                let others: Vec<LatticePos> = local
                    .known_positions
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != local.id)
                    .map(|(_, p)| *p)
                    .collect();
                data.extend(centred_positions(cfg, &local.position, &others));
            }
            "belief_map" => data.extend_from_slice(&pooled.as_ref().expect("pooled").0),
            "entropy_map" => data.extend_from_slice(&pooled.as_ref().expect("pooled").1),
            "measurement_entropy" => {
                let mut plane = vec![0.0; gg];
                if let Some(m) = &local.last_measurement {
                    let h1 = weighted_entropy_unchecked(m.accuracy, &cfg.weights);
                    let h0 = weighted_entropy_unchecked(1.0 - m.accuracy, &cfg.weights);
                    let norm = 1.0 / (factor * factor) as f64;
                    for (x, y) in m.footprint.cells() {
                        let h = if m.value(x, y) == 1 { h1 } else { h0 };
                        plane[(y / factor) * g + x / factor] += h * norm;
                    }
                }
                data.extend(plane);
            }
            "footprint_map" => {
                let mut rects = vec![footprint_of(cfg, &local.position)?];
                for &j in &local.heard {
                    rects.push(footprint_of(cfg, &local.known_positions[j])?);
                }
                data.extend(union_plane(&rects, factor, g));
            }
            "agent_id" => data.extend(std::iter::repeat_n(local.id as f64 / local.num_agents as f64, gg)),
            "budget" => data.extend(std::iter::repeat_n(local.budget as f64 / cfg.budget as f64, gg)),
            _ => unreachable!("actor plane names come from the toggle list"),
        }
    }
    Ok(FeatureStack { names, grid: g, data })
}

/// Global position, belief, entropy and footprint-union planes.
pub fn global_planes(global: &GlobalState, cfg: &EnvConfig) -> Result<Vec<f64>> {
    let factor = check_divisible(cfg, &global.map)?;
    let g = cfg.lattice_size();
    let mut data = absolute_positions(cfg, &global.positions);
    let (belief, entropy) = pool_map(&global.map, &cfg.weights, factor);
    data.extend(belief);
    data.extend(entropy);
    let rects = global
        .positions
        .iter()
        .map(|p| footprint_of(cfg, p))
        .collect::<Result<Vec<_>>>()?;
    data.extend(union_plane(&rects, factor, g));
    Ok(data)
}

/// One-hot action planes for every agent except `agent`, in id order.
pub fn action_planes(positions: &[LatticePos], agent: usize, actions: &[Action], g: usize) -> Result<Vec<f64>> {
    if actions.len() != positions.len() {
        return Err(Error::Contract(format!(
            "{} actions for {} agents",
            actions.len(),
            positions.len()
        )));
    }
    let gg = g * g;
    let others = positions.len() - 1;
    let mut data = vec![0.0; others * Action::COUNT * gg];
    for (slot, j) in (0..positions.len()).filter(|&j| j != agent).enumerate() {
        let p = positions[j];
        data[(slot * Action::COUNT + actions[j].index()) * gg + p.row * g + p.col] = 1.0;
    }
    Ok(data)
}

/// Critic planes: actor planes, then global and action planes as `input` asks.
/// `actions` holds every agent's action (the entry for `agent` is ignored).
#[allow(clippy::too_many_arguments)]
pub fn build_critic_features(
    global: &GlobalState,
    local: &AgentLocalState,
    actions: &[Action],
    cfg: &EnvConfig,
    toggles: &FeatureToggles,
    input: CriticInput,
) -> Result<FeatureStack> {
    let mut stack = build_actor_features(local, cfg, toggles)?;
    if input != CriticInput::Local {
        stack.data.extend(global_planes(global, cfg)?);
    }
    if input == CriticInput::GlobalWithActions {
        stack
            .data
            .extend(action_planes(&global.positions, local.id, actions, stack.grid)?);
    }
    stack.names = critic_plane_names(toggles, input, global.positions.len());
    Ok(stack)
}

/// Convolutional encoder followed by a fully connected head.
#[derive(Debug, Clone)]
pub struct Network {
    pub store: ParamStore,
    convs: Vec<Conv2d>,
    fcs: Vec<Linear>,
    pub in_channels: usize,
    pub grid: usize,
    pub outputs: usize,
    pub net: NetConfig,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        grid: usize,
        net: &NetConfig,
        outputs: usize,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::Config("network needs at least one input plane".into()));
        }
        let mut store = ParamStore::new();
        let mut convs = Vec::new();
        let mut ch = in_channels;
        let mut side = grid;
        for (i, (&out, &stride)) in net.conv_channels.iter().zip(&net.conv_strides).enumerate() {
            let c = Conv2d::new(&mut store, &format!("conv{i}"), ch, out, 3, stride, 1, rng);
            side = c.output_size(side);
            ch = out;
            convs.push(c);
        }
        let mut width = ch * side * side;
        let mut fcs = Vec::new();
        for (i, &h) in net.hidden.iter().enumerate() {
            fcs.push(Linear::new(&mut store, &format!("fc{i}"), width, h, rng));
            width = h;
        }
        fcs.push(Linear::with_gain(&mut store, "out", width, outputs, output_gain, rng));
        Ok(Self {
            store,
            convs,
            fcs,
            in_channels,
            grid,
            outputs,
            net: net.clone(),
        })
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.grid * self.grid
    }

    /// Stacks samples into a `[B, C, G, G]` input node.
    pub fn input(&self, g: &mut Graph, samples: &[&[f64]]) -> Result<Var> {
        let len = self.input_len();
        let mut data = Vec::with_capacity(samples.len() * len);
        for s in samples {
            if s.len() != len {
                return Err(Error::Config(format!(
                    "network expects {} planes of {}x{} ({len} values), got {}",
                    self.in_channels,
                    self.grid,
                    self.grid,
                    s.len()
                )));
            }
            data.extend_from_slice(s);
        }
        let t = Tensor::from_vec(&[samples.len(), self.in_channels, self.grid, self.grid], data)?;
        Ok(g.input(t))
    }

    /// `[B, C, G, G]` to `[B, outputs]`.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let mut h = x;
        for c in &self.convs {
            h = c.forward(g, &self.store, h)?;
            h = g.relu(h);
        }
        h = g.flatten(h)?;
        let last = self.fcs.len() - 1;
        for (i, l) in self.fcs.iter().enumerate() {
            h = l.forward(g, &self.store, h)?;
            if i < last {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    /// Forward pass without keeping the tape, one row per sample.
    pub fn evaluate(&self, samples: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let x = self.input(&mut g, samples)?;
        let y = self.forward(&mut g, x)?;
        Ok(g.value(y).data().chunks(self.outputs).map(|c| c.to_vec()).collect())
    }

    fn metadata(&self, kind: &str, names: &[String]) -> Metadata {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("kind".into(), kind.into()),
            ("planes".into(), names.join(",")),
            ("grid".into(), self.grid.to_string()),
            ("outputs".into(), self.outputs.to_string()),
            ("conv_channels".into(), list(&self.net.conv_channels)),
            ("conv_strides".into(), list(&self.net.conv_strides)),
            ("hidden".into(), list(&self.net.hidden)),
        ]
    }

    fn from_metadata(meta: &Metadata) -> Result<(Self, Vec<String>)> {
        let get = |k: &str| {
            meta_get(meta, k).ok_or_else(|| Error::Data(format!("checkpoint lacks {k:?} metadata")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Data(format!("bad {k:?} metadata")))
        };
        let list = |k: &str| -> Result<Vec<usize>> {
            get(k)?
                .split(',')
                .map(|s| s.parse().map_err(|_| Error::Data(format!("bad {k:?} metadata"))))
                .collect()
        };
        let names: Vec<String> = get("planes")?.split(',').map(|s| s.to_string()).collect();
        let net = NetConfig {
            conv_channels: list("conv_channels")?,
            conv_strides: list("conv_strides")?,
            hidden: list("hidden")?,
        };
        // weights are overwritten by the checkpoint values right after construction
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let network = Network::new(names.len(), num("grid")?, &net, num("outputs")?, 1.0, &mut rng)?;
        Ok((network, names))
    }
}

fn write_network<W: Write>(w: &mut W, net: &Network, meta: &Metadata) -> Result<()> {
    write_checkpoint(w, &net.store, meta)?;
    Ok(())
}

fn read_network<R: Read>(r: &mut R) -> Result<(Network, Vec<String>, Metadata)> {
    let (loaded, meta) = read_checkpoint(r)?;
    let (mut net, names) = Network::from_metadata(&meta)?;
    net.store.copy_values_from(&loaded)?;
    Ok((net, names, meta))
}

/// Shared decentralised policy.
#[derive(Debug, Clone)]
pub struct Actor {
    pub net: Network,
    pub toggles: FeatureToggles,
    pub manifest: Vec<String>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(cfg: &EnvConfig, toggles: &FeatureToggles, net: &NetConfig, rng: &mut R) -> Result<Self> {
        let manifest = actor_plane_names(toggles);
        let net = Network::new(manifest.len(), cfg.lattice_size(), net, Action::COUNT, 0.1, rng)?;
        Ok(Self {
            net,
            toggles: *toggles,
            manifest,
        })
    }

    pub fn features(&self, local: &AgentLocalState, cfg: &EnvConfig) -> Result<FeatureStack> {
        build_actor_features(local, cfg, &self.toggles)
    }

    /// Policy rows for a batch of samples.
    pub fn policy(&self, samples: &[&[f64]], masks: &[ActionMask], eps: f64) -> Result<Vec<[f64; Action::COUNT]>> {
        let logits = self.net.evaluate(samples)?;
        logits
            .iter()
            .zip(masks)
            .map(|(l, m)| {
                let p = masked_bounded_softmax(l, m, eps)?;
                Ok(std::array::from_fn(|i| p[i]))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        write_network(&mut f, &self.net, &self.net.metadata("actor", &self.manifest))?;
        f.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        let (net, manifest, meta) = read_network(&mut f)?;
        if meta_get(&meta, "kind") != Some("actor") {
            return Err(Error::Data(format!("{} is not an actor checkpoint", path.display())));
        }
        let mut toggles = FeatureToggles::default();
        for name in FeatureToggles::NAMES {
            toggles.set(name, manifest.iter().any(|m| m == name))?;
        }
        if actor_plane_names(&toggles) != manifest {
            return Err(Error::Data("actor plane manifest is not in canonical order".into()));
        }
        Ok(Self { net, toggles, manifest })
    }
}

/// Per-action value estimates for one agent.
#[derive(Debug, Clone)]
pub struct Critic {
    pub net: Network,
    pub input: CriticInput,
    pub manifest: Vec<String>,
}

impl Critic {
    /// `outputs` is 6 for a Q critic and 1 for a state-value network.
    pub fn new<R: Rng + ?Sized>(
        cfg: &EnvConfig,
        toggles: &FeatureToggles,
        input: CriticInput,
        net: &NetConfig,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let manifest = critic_plane_names(toggles, input, cfg.num_agents);
        let net = Network::new(manifest.len(), cfg.lattice_size(), net, outputs, 1.0, rng)?;
        Ok(Self { net, input, manifest })
    }

    pub fn values(&self, samples: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        self.net.evaluate(samples)
    }

    pub fn write<W: Write>(&self, w: &mut W, kind: &str) -> Result<()> {
        let mut meta = self.net.metadata(kind, &self.manifest);
        meta.push(("input".into(), self.input.name().into()));
        write_network(w, &self.net, &meta)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let (net, manifest, meta) = read_network(r)?;
        let input = CriticInput::from_name(meta_get(&meta, "input").unwrap_or("global-actions"))?;
        Ok(Self { net, input, manifest })
    }

    /// Overwrites this critic's weights from a checkpoint with the same layout.
    pub fn load_weights<R: Read>(&mut self, r: &mut R) -> Result<()> {
        load_into(r, &mut self.net.store)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Sample,
    Argmax,
}

/// Decentralised execution of a trained actor.
#[derive(Debug, Clone)]
pub struct LearnedPlanner {
    actor: Arc<Actor>,
    mode: SampleMode,
}

impl LearnedPlanner {
    pub fn new(actor: Arc<Actor>, mode: SampleMode) -> Self {
        Self { actor, mode }
    }
}

/// Draws an index from a probability row.
pub fn sample_index(p: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Highest-probability entry; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

impl Planner for LearnedPlanner {
    fn name(&self) -> &str {
        "learned"
    }

    fn act(&mut self, ctx: &PlanContext<'_>, rng: &mut dyn RngCore) -> Result<Action> {
        let f = self.actor.features(ctx.local, ctx.cfg)?;
        let p = self.actor.policy(&[&f.data], &[ctx.mask], 0.0)?[0];
        let i = match self.mode {
            SampleMode::Sample => sample_index(&p, rng),
            SampleMode::Argmax => argmax(&p),
        };
        Ok(Action::ALL[i])
    }
}
