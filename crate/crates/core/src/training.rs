//! On-policy actor-critic training with a counterfactual baseline.
//!
//! Training alternates between collecting whole missions with the current
//! shared actor and several epochs of minibatch updates, critic first. The
//! critic regresses onto TD(λ) returns bootstrapped from a periodically
//! copied target critic; the actor follows `-log π(u) A`, where `A` compares
//! the value of the taken action with the policy-weighted value of all of
//! the agent's alternatives while the other agents' actions stay fixed.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ipp_tensor::{Adam, AdamConfig, Graph, TensorError};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::{Config, Variant};
use crate::environment::{generate_terrain, Action, ActionMask, Environment};
use crate::error::{Error, Result};
use crate::policy::{action_planes, build_actor_features, global_planes, sample_index, Actor, Critic, CriticInput, Network};
use crate::seeding::{derive_seed, stream_rng, TAG_NOISE, TAG_PLANNER, TAG_SHUFFLE, TAG_TERRAIN};

/// One agent decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Critic input; the actor input is its first `actor_len` values.
    pub features: Vec<f64>,
    pub actor_len: usize,
    pub action: Action,
    /// Behaviour policy the action was drawn from.
    pub policy: [f64; Action::COUNT],
    pub mask: ActionMask,
    /// Team reward of the step.
    pub reward: f64,
    pub terminal: bool,
    pub mission: usize,
    pub step: usize,
    pub agent: usize,
}

impl Transition {
    pub fn actor_features(&self) -> &[f64] {
        &self.features[..self.actor_len]
    }
}

/// λ-returns for one trajectory. `q_taken[t]` is the target critic's value
/// of the action taken at step `t`; the last step is terminal.
pub fn td_lambda_targets(rewards: &[f64], q_taken: &[f64], lambda: f64, gamma: f64) -> Result<Vec<f64>> {
    if rewards.len() != q_taken.len() {
        return Err(Error::Contract(format!(
            "{} rewards but {} values",
            rewards.len(),
            q_taken.len()
        )));
    }
    let n = rewards.len();
    let mut g = vec![0.0; n];
    for t in (0..n).rev() {
        g[t] = if t + 1 == n {
            rewards[t]
        } else {
            rewards[t] + gamma * ((1.0 - lambda) * q_taken[t + 1] + lambda * g[t + 1])
        };
    }
    Ok(g)
}

fn check_distribution(pi: &[f64]) -> Result<()> {
    let s: f64 = pi.iter().sum();
    if (s - 1.0).abs() > 1e-9 || pi.iter().any(|&p| p < 0.0) {
        return Err(Error::Contract(format!("policy sums to {s}")));
    }
    Ok(())
}

/// `Q(u) - Σ_u' π(u') Q(u')`.
pub fn counterfactual_advantage(q: &[f64], pi: &[f64], taken: usize) -> Result<f64> {
    if q.len() != pi.len() || taken >= q.len() {
        return Err(Error::Contract("advantage inputs disagree in length".into()));
    }
    check_distribution(pi)?;
    let baseline: f64 = q.iter().zip(pi).map(|(a, b)| a * b).sum();
    Ok(q[taken] - baseline)
}

/// Advantage of `taken` under `variant`. The state-value variant needs `v`.
pub fn advantage_variant(variant: Variant, q: &[f64], pi: &[f64], v: Option<f64>, taken: usize) -> Result<f64> {
    match variant {
        Variant::CentralQv => {
            let v = v.ok_or_else(|| Error::Config("state-value variant needs a value network".into()))?;
            if taken >= q.len() {
                return Err(Error::Contract("taken action out of range".into()));
            }
            Ok(q[taken] - v)
        }
        Variant::Coma | Variant::ActorIndependent | Variant::Decentralised => {
            counterfactual_advantage(q, pi, taken)
        }
    }
}

/// One Adam step on the mean squared error between the value of `actions`
/// (column 0 when the network has one output) and `targets`.
pub fn critic_update(
    net: &mut Network,
    adam: &mut Adam,
    samples: &[&[f64]],
    actions: &[usize],
    targets: &[f64],
    grad_clip: f64,
) -> Result<f64> {
    if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::Divergence {
            block: 0,
            message: format!("non-finite critic target {t}"),
        });
    }
    let mut g = Graph::new();
    let x = net.input(&mut g, samples)?;
    let q = net.forward(&mut g, x)?;
    let index: Vec<usize> = if net.outputs == 1 { vec![0; samples.len()] } else { actions.to_vec() };
    let picked = g.gather(q, &index)?;
    let loss = g.mse(picked, targets)?;
    let value = g.value(loss).data()[0];
    net.store.zero_grad();
    g.backward(loss, &mut net.store)?;
    net.store.clip_grad_norm(grad_clip);
    adam.step(&mut net.store)?;
    Ok(value)
}

/// One Adam step on `mean(-log π(u) A)` with the advantages held constant.
#[allow(clippy::too_many_arguments)]
pub fn actor_update(
    net: &mut Network,
    adam: &mut Adam,
    samples: &[&[f64]],
    masks: &[ActionMask],
    actions: &[usize],
    advantages: &[f64],
    eps: f64,
    grad_clip: f64,
) -> Result<f64> {
    let mut g = Graph::new();
    let x = net.input(&mut g, samples)?;
    let logits = net.forward(&mut g, x)?;
    let flat_mask: Vec<bool> = masks.iter().flat_map(|m| m.iter().copied()).collect();
    let p = g.masked_bounded_softmax(logits, &flat_mask, eps)?;
    let picked = g.gather(p, actions)?;
    if let Some(i) = g.value(picked).data().iter().position(|&v| v <= 0.0) {
        return Err(Error::Data(format!(
            "taken action {} of sample {i} has zero probability",
            actions[i]
        )));
    }
    let lp = g.ln(picked);
    let neg: Vec<f64> = advantages.iter().map(|a| -a).collect();
    let weighted = g.mul_const(lp, &neg)?;
    let loss = g.mean(weighted);
    let value = g.value(loss).data()[0];
    net.store.zero_grad();
    g.backward(loss, &mut net.store)?;
    net.store.clip_grad_norm(grad_clip);
    adam.step(&mut net.store)?;
    Ok(value)
}

/// Critic input used for the Q network of each variant.
pub fn critic_input(variant: Variant) -> CriticInput {
    match variant {
        Variant::Coma | Variant::CentralQv => CriticInput::GlobalWithActions,
        Variant::ActorIndependent => CriticInput::Global,
        Variant::Decentralised => CriticInput::Local,
    }
}

/// Terrain, noise and action-sampling streams of training mission `mission`.
pub fn mission_environment(cfg: &Config, seed: u64, mission: usize) -> Result<Environment> {
    let mut terrain_rng = stream_rng(seed, TAG_TERRAIN, mission as u64);
    let terrain = generate_terrain(&mut terrain_rng, &cfg.env);
    Environment::new(cfg.env.clone(), terrain, derive_seed(seed, TAG_NOISE, mission as u64))
}

/// Result of one mission under the shared actor.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    /// Undiscounted team return.
    pub team_return: f64,
}

/// Runs one mission sampling from `actor` with exploration weight `eps`.
/// Transitions are recorded only when `critic` names the critic input.
pub fn rollout(
    actor: &Actor,
    cfg: &Config,
    seed: u64,
    mission: usize,
    eps: f64,
    critic: Option<CriticInput>,
) -> Result<Rollout> {
    let mut env = mission_environment(cfg, seed, mission)?;
    let mut rng = stream_rng(seed, TAG_PLANNER, mission as u64);
    let n = env.num_agents();
    let g = cfg.env.lattice_size();
    let mut transitions = Vec::new();
    let mut team_return = 0.0;
    while !env.done() {
        let feats = (0..n)
            .map(|i| build_actor_features(env.local(i), env.cfg(), &actor.toggles))
            .collect::<Result<Vec<_>>>()?;
        let masks: Vec<ActionMask> = (0..n).map(|i| env.valid_actions(i)).collect();
        let refs: Vec<&[f64]> = feats.iter().map(|f| f.data.as_slice()).collect();
        let policies = actor.policy(&refs, &masks, eps)?;
        let actions: Vec<Action> = policies
            .iter()
            .map(|p| Action::ALL[sample_index(p, &mut rng)])
            .collect();
        let step = env.global().step;
        let mut pending = Vec::new();
        if let Some(input) = critic {
            let globals = match input {
                CriticInput::Local => Vec::new(),
                _ => global_planes(env.global(), env.cfg())?,
            };
            for (i, f) in feats.into_iter().enumerate() {
                let actor_len = f.data.len();
                let mut features = f.data;
                features.extend_from_slice(&globals);
                if input == CriticInput::GlobalWithActions {
                    features.extend(action_planes(&env.global().positions, i, &actions, g)?);
                }
                pending.push(Transition {
                    features,
                    actor_len,
                    action: actions[i],
                    policy: policies[i],
                    mask: masks[i],
                    reward: 0.0,
                    terminal: false,
                    mission,
                    step,
                    agent: i,
                });
            }
        }
        let out = env.step(&actions)?;
        team_return += out.reward;
        for mut t in pending {
            t.reward = out.reward;
            t.terminal = out.done;
            transitions.push(t);
        }
    }
    Ok(Rollout {
        transitions,
        team_return,
    })
}

/// Team returns of `actor` on training missions `missions` at weight `eps`.
pub fn evaluate_returns(actor: &Actor, cfg: &Config, seed: u64, missions: &[usize], eps: f64) -> Result<Vec<f64>> {
    missions
        .par_iter()
        .map(|&m| rollout(actor, cfg, seed, m, eps, None).map(|r| r.team_return))
        .collect()
}

pub const TRAIN_LOG_HEADER: &str =
    "block,missions_done,env_interactions,mean_return,actor_loss,critic_loss,epsilon,wallclock_s";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub block: usize,
    pub missions_done: usize,
    pub env_interactions: usize,
    pub mean_return: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub epsilon: f64,
    pub wallclock_s: f64,
}

pub fn write_train_log<W: Write>(w: &mut W, rows: &[TrainLogRow]) -> std::io::Result<()> {
    writeln!(w, "{TRAIN_LOG_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.block,
            r.missions_done,
            r.env_interactions,
            r.mean_return,
            r.actor_loss,
            r.critic_loss,
            r.epsilon,
            r.wallclock_s
        )?;
    }
    Ok(())
}

pub struct Trainer {
    pub cfg: Config,
    seed: u64,
    pub actor: Actor,
    pub critic: Critic,
    target: Critic,
    pub value: Option<Critic>,
    adam_actor: Adam,
    adam_critic: Adam,
    adam_value: Option<Adam>,
    missions_done: usize,
    interactions: usize,
    since_copy: usize,
    block: usize,
    log: Vec<TrainLogRow>,
    returns: Vec<(usize, f64, f64)>,
    record_wallclock: bool,
    start: Instant,
}

impl Trainer {
    pub fn new(cfg: Config, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, crate::seeding::TAG_INIT, 0);
        let actor = Actor::new(&cfg.env, &cfg.features, &cfg.net, &mut rng)?;
        let input = critic_input(cfg.train.variant);
        let critic = Critic::new(&cfg.env, &cfg.features, input, &cfg.net, Action::COUNT, &mut rng)?;
        let value = (cfg.train.variant == Variant::CentralQv)
            .then(|| Critic::new(&cfg.env, &cfg.features, CriticInput::Global, &cfg.net, 1, &mut rng))
            .transpose()?;
        let t = &cfg.train;
        let adam_actor = Adam::new(&actor.net.store, AdamConfig::with_lr(t.actor_lr));
        let adam_critic = Adam::new(&critic.net.store, AdamConfig::with_lr(t.critic_lr));
        let adam_value = value
            .as_ref()
            .map(|v| Adam::new(&v.net.store, AdamConfig::with_lr(t.critic_lr)));
        let target = critic.clone();
        Ok(Self {
            cfg,
            seed,
            actor,
            critic,
            target,
            value,
            adam_actor,
            adam_critic,
            adam_value,
            missions_done: 0,
            interactions: 0,
            since_copy: 0,
            block: 0,
            log: Vec::new(),
            returns: Vec::new(),
            record_wallclock: false,
            start: Instant::now(),
        })
    }

    /// Record elapsed wall-clock seconds in the log instead of 0.
    pub fn record_wallclock(&mut self, on: bool) {
        self.record_wallclock = on;
    }

    pub fn target(&self) -> &Critic {
        &self.target
    }

    pub fn log(&self) -> &[TrainLogRow] {
        &self.log
    }

    /// `(mission, epsilon, team return)` of every training mission so far.
    pub fn mission_returns(&self) -> &[(usize, f64, f64)] {
        &self.returns
    }

    pub fn missions_done(&self) -> usize {
        self.missions_done
    }

    pub fn is_finished(&self) -> bool {
        self.missions_done >= self.cfg.train.missions
    }

    fn interactions_per_mission(&self) -> usize {
        let e = &self.cfg.env;
        if self.cfg.train.count_agent_decisions {
            e.budget * e.num_agents
        } else {
            e.budget
        }
    }

    /// Collects one block of missions and optimises on it. Returns `false`
    /// once the mission budget is spent.
    pub fn run_block(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        let block = self.block;
        let t = self.cfg.train.clone();
        let per_mission = self.interactions_per_mission();
        let count = t
            .rollout_block
            .div_ceil(per_mission)
            .min(t.missions - self.missions_done)
            .max(1);
        let eps = t.epsilon(self.missions_done);
        let input = self.critic.input;
        let first = self.missions_done;
        let rollouts: Vec<Rollout> = {
            let actor = &self.actor;
            let cfg = &self.cfg;
            let seed = self.seed;
            (first..first + count)
                .into_par_iter()
                .map(|m| rollout(actor, cfg, seed, m, t.epsilon(m), Some(input)))
                .collect::<Result<Vec<_>>>()?
        };
        let mut transitions = Vec::new();
        let mut total_return = 0.0;
        for (k, r) in rollouts.into_iter().enumerate() {
            total_return += r.team_return;
            self.returns.push((first + k, t.epsilon(first + k), r.team_return));
            transitions.extend(r.transitions);
        }
        self.missions_done += count;
        self.interactions += count * per_mission;
        self.since_copy += count * per_mission;

        let targets = self.lambda_targets(&transitions)?;
        let (actor_loss, critic_loss) = self.optimise(&transitions, &targets, eps, block)?;
        if !actor_loss.is_finite() || !critic_loss.is_finite() {
            return Err(Error::Divergence {
                block,
                message: format!("actor loss {actor_loss}, critic loss {critic_loss}"),
            });
        }
        if self.since_copy >= t.target_interval {
            self.target.net.store.copy_values_from(&self.critic.net.store)?;
            self.since_copy = 0;
        }
        self.log.push(TrainLogRow {
            block,
            missions_done: self.missions_done,
            env_interactions: self.interactions,
            mean_return: total_return / count as f64,
            actor_loss,
            critic_loss,
            epsilon: eps,
            wallclock_s: if self.record_wallclock {
                self.start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        self.block += 1;
        Ok(true)
    }

    fn lambda_targets(&self, transitions: &[Transition]) -> Result<Vec<f64>> {
        let mut q_taken = vec![0.0; transitions.len()];
        for (chunk_idx, chunk) in transitions.chunks(256).enumerate() {
            let refs: Vec<&[f64]> = chunk.iter().map(|t| t.features.as_slice()).collect();
            let q = self.target.values(&refs)?;
            for (k, (row, t)) in q.iter().zip(chunk).enumerate() {
                q_taken[chunk_idx * 256 + k] = row[t.action.index()];
            }
        }
        // trajectories are contiguous per mission and interleaved by agent
        let mut targets = vec![0.0; transitions.len()];
        let mut start = 0;
        while start < transitions.len() {
            let mission = transitions[start].mission;
            let mut end = start;
            while end < transitions.len() && transitions[end].mission == mission {
                end += 1;
            }
            let agents = self.cfg.env.num_agents;
            for a in 0..agents {
                let idx: Vec<usize> = (start..end).filter(|&i| transitions[i].agent == a).collect();
                let r: Vec<f64> = idx.iter().map(|&i| transitions[i].reward).collect();
                let q: Vec<f64> = idx.iter().map(|&i| q_taken[i]).collect();
                let g = td_lambda_targets(&r, &q, self.cfg.train.lambda, self.cfg.train.gamma)?;
                for (&i, v) in idx.iter().zip(g) {
                    targets[i] = v;
                }
            }
            start = end;
        }
        Ok(targets)
    }

    fn optimise(&mut self, transitions: &[Transition], targets: &[f64], eps: f64, block: usize) -> Result<(f64, f64)> {
        let t = self.cfg.train.clone();
        let mut order: Vec<usize> = (0..transitions.len()).collect();
        let mut rng = stream_rng(self.seed, TAG_SHUFFLE, block as u64);
        let value_len = self.value.as_ref().map(|v| v.net.input_len());
        let (mut actor_sum, mut critic_sum, mut batches) = (0.0, 0.0, 0usize);
        for _ in 0..t.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(t.batch_size) {
                let critic_in: Vec<&[f64]> = batch.iter().map(|&i| transitions[i].features.as_slice()).collect();
                let actor_in: Vec<&[f64]> = batch.iter().map(|&i| transitions[i].actor_features()).collect();
                let actions: Vec<usize> = batch.iter().map(|&i| transitions[i].action.index()).collect();
                let masks: Vec<ActionMask> = batch.iter().map(|&i| transitions[i].mask).collect();
                let y: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();

                let closs = critic_update(
                    &mut self.critic.net,
                    &mut self.adam_critic,
                    &critic_in,
                    &actions,
                    &y,
                    t.grad_clip,
                )
                .map_err(|e| relabel(e, block))?;
                let v_rows = match (&mut self.value, &mut self.adam_value, value_len) {
                    (Some(v), Some(adam), Some(len)) => {
                        let v_in: Vec<&[f64]> = critic_in.iter().map(|s| &s[..len]).collect();
                        critic_update(&mut v.net, adam, &v_in, &actions, &y, t.grad_clip)
                            .map_err(|e| relabel(e, block))?;
                        Some(v.values(&v_in)?)
                    }
                    _ => None,
                };
                let q = self.critic.values(&critic_in)?;
                let pi = self.actor.policy(&actor_in, &masks, eps)?;
                let adv = (0..batch.len())
                    .map(|k| {
                        advantage_variant(
                            t.variant,
                            &q[k],
                            &pi[k],
                            v_rows.as_ref().map(|v| v[k][0]),
                            actions[k],
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let aloss = actor_update(
                    &mut self.actor.net,
                    &mut self.adam_actor,
                    &actor_in,
                    &masks,
                    &actions,
                    &adv,
                    eps,
                    t.grad_clip,
                )
                .map_err(|e| relabel(e, block))?;
                if !aloss.is_finite() || !closs.is_finite() {
                    return Err(Error::Divergence {
                        block,
                        message: format!("actor loss {aloss}, critic loss {closs}"),
                    });
                }
                actor_sum += aloss;
                critic_sum += closs;
                batches += 1;
            }
        }
        Ok((actor_sum / batches as f64, critic_sum / batches as f64))
    }

    /// Runs blocks until the mission budget is spent, calling `after_block`
    /// after each one.
    pub fn train(&mut self, mut after_block: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        while self.run_block()? {
            after_block(self)?;
        }
        Ok(())
    }

    /// Writes `actor.ckpt`, `critic.ckpt` and, for the state-value variant,
    /// `value.ckpt` into `dir`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.actor.save(&dir.join("actor.ckpt"))?;
        let write = |name: &str, c: &Critic, kind: &str| -> Result<()> {
            let path = dir.join(name);
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
            c.write(&mut f, kind)?;
            f.flush().map_err(|e| Error::io(&path, e))
        };
        write("critic.ckpt", &self.critic, "critic")?;
        if let Some(v) = &self.value {
            write("value.ckpt", v, "value")?;
        }
        Ok(())
    }
}

fn relabel(e: Error, block: usize) -> Error {
    match e {
        Error::Divergence { message, .. } => Error::Divergence { block, message },
        Error::Tensor(TensorError::Divergence(message)) => Error::Divergence { block, message },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetConfig;
    use crate::environment::EnvConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lambda_limits() {
        let r = [1.0, 0.0, 2.0];
        let q = [5.0, 7.0, 11.0];
        let g1 = td_lambda_targets(&r, &q, 1.0, 0.5).unwrap();
        assert_eq!(g1[0], 1.5);
        let g0 = td_lambda_targets(&r, &q, 0.0, 0.5).unwrap();
        assert_eq!(g0, vec![1.0 + 0.5 * 7.0, 0.0 + 0.5 * 11.0, 2.0]);
        for lambda in [0.0, 0.3, 1.0] {
            assert_eq!(td_lambda_targets(&[4.0], &[9.0], lambda, 0.9).unwrap(), vec![4.0]);
        }
        assert!(td_lambda_targets(&r, &q[..2], 0.5, 0.9).is_err());
    }

    #[test]
    fn advantage_examples() {
        let q = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let uniform = [1.0 / 6.0; 6];
        assert!((counterfactual_advantage(&q, &uniform, 5).unwrap() - 2.5).abs() < 1e-12);
        let mut point = [0.0; 6];
        point[2] = 1.0;
        assert_eq!(counterfactual_advantage(&q, &point, 2).unwrap(), 0.0);
        assert!(counterfactual_advantage(&q, &[0.5; 6], 0).is_err());
        assert_eq!(advantage_variant(Variant::CentralQv, &q, &uniform, Some(4.0), 3).unwrap(), 0.0);
        assert!(matches!(
            advantage_variant(Variant::CentralQv, &q, &uniform, None, 3),
            Err(Error::Config(_))
        ));
        assert_eq!(advantage_variant(Variant::ActorIndependent, &q, &point, None, 2).unwrap(), 0.0);
    }

    #[test]
    fn advantage_has_zero_mean_under_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let raw: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let pi: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let mean: f64 = (0..6)
                .map(|u| pi[u] * counterfactual_advantage(&q, &pi, u).unwrap())
                .sum();
            assert!(mean.abs() < 1e-10);
        }
    }

    fn tiny_net(channels: usize, outputs: usize, seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = NetConfig {
            conv_channels: vec![4],
            conv_strides: vec![2],
            hidden: vec![8],
        };
        Network::new(channels, 4, &net, outputs, 1.0, &mut rng).unwrap()
    }

    fn sample(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_advantage_leaves_actor_unchanged() {
        let mut net = tiny_net(2, 6, 1);
        let before = net.store.clone();
        let mut adam = Adam::new(&net.store, AdamConfig::with_lr(0.01));
        let x = sample(2, net.input_len());
        actor_update(&mut net, &mut adam, &[&x], &[[true; 6]], &[3], &[0.0], 0.1, 10.0).unwrap();
        for id in net.store.ids() {
            for (a, b) in net.store.value(id).data().iter().zip(before.value(id).data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn advantage_sign_moves_probability() {
        for (adv, up) in [(1.0, true), (-1.0, false)] {
            let mut net = tiny_net(2, 6, 3);
            let mut adam = Adam::new(&net.store, AdamConfig::with_lr(1e-3));
            let x = sample(4, net.input_len());
            let prob = |n: &Network| {
                let l = n.evaluate(&[&x]).unwrap();
                ipp_tensor::masked_bounded_softmax(&l[0], &[true; 6], 0.0).unwrap()[2]
            };
            let p0 = prob(&net);
            actor_update(&mut net, &mut adam, &[&x], &[[true; 6]], &[2], &[adv], 0.0, 10.0).unwrap();
            let p1 = prob(&net);
            assert_eq!(p1 > p0, up, "{p0} -> {p1}");
        }
    }

    #[test]
    fn critic_regression_converges() {
        let mut net = tiny_net(2, 6, 5);
        let mut adam = Adam::new(&net.store, AdamConfig::with_lr(1e-3));
        let x = sample(6, net.input_len());
        let mut last = f64::INFINITY;
        for step in 0..5000 {
            let loss = critic_update(&mut net, &mut adam, &[&x], &[4], &[0.75], 10.0).unwrap();
            if step < 10 {
                assert!(loss <= last);
            }
            last = loss;
        }
        let q = net.evaluate(&[&x]).unwrap()[0][4];
        assert!((q - 0.75).abs() < 1e-3, "{q}");
    }

    #[test]
    fn matching_targets_give_no_update() {
        let mut net = tiny_net(2, 6, 7);
        let before = net.store.clone();
        let mut adam = Adam::new(&net.store, AdamConfig::with_lr(1e-2));
        let x = sample(8, net.input_len());
        let q = net.evaluate(&[&x]).unwrap()[0][1];
        critic_update(&mut net, &mut adam, &[&x], &[1], &[q], 10.0).unwrap();
        for id in net.store.ids() {
            assert_eq!(net.store.value(id), before.value(id));
        }
        assert!(critic_update(&mut net, &mut adam, &[&x], &[1], &[f64::NAN], 10.0).is_err());
    }

    fn smoke_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.env = EnvConfig {
            map_resolution: 1.0,
            num_agents: 2,
            budget: 3,
            ..EnvConfig::default()
        };
        cfg.net = NetConfig {
            conv_channels: vec![4, 4],
            conv_strides: vec![1, 2],
            hidden: vec![16],
        };
        cfg.train.missions = 6;
        cfg.train.rollout_block = 12;
        cfg.train.epochs = 2;
        cfg.train.batch_size = 8;
        cfg.train.target_interval = 12;
        cfg
    }

    #[test]
    fn training_runs_and_is_reproducible() {
        let cfg = smoke_cfg();
        let run = || {
            let mut t = Trainer::new(cfg.clone(), 11).unwrap();
            let mut copies_ok = true;
            t.train(|tr| {
                copies_ok &= tr.since_copy != 0
                    || tr.target().net.store.ids().all(|id| {
                        tr.target().net.store.value(id) == tr.critic.net.store.value(id)
                    });
                Ok(())
            })
            .unwrap();
            assert!(copies_ok);
            let mut buf = Vec::new();
            write_train_log(&mut buf, t.log()).unwrap();
            buf
        };
        let a = run();
        assert_eq!(a, run());
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
    }

    #[test]
    fn state_value_variant_has_value_network() {
        let mut cfg = smoke_cfg();
        cfg.train.variant = Variant::CentralQv;
        cfg.train.missions = 2;
        let mut t = Trainer::new(cfg, 3).unwrap();
        assert!(t.value.is_some());
        t.train(|_| Ok(())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        t.save_checkpoint(dir.path()).unwrap();
        assert!(dir.path().join("value.ckpt").exists());
    }

    #[test]
    fn td_targets_match_forward_view_on_rollouts() {
        let cfg = smoke_cfg();
        let t = Trainer::new(cfg.clone(), 5).unwrap();
        let r = rollout(&t.actor, &cfg, 5, 0, 0.3, Some(t.critic.input)).unwrap();
        assert_eq!(r.transitions.len(), 6);
        assert!(r.transitions.iter().all(|tr| (tr.policy.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert!(r.transitions.iter().filter(|tr| tr.terminal).count() == 2);
    }
}
