//! Straightforward re-implementations used as test oracles, plus small
//! scenario helpers.

#![allow(dead_code)]

use ipp_core::config::{Config, EnvConfig, NetConfig};
use ipp_core::environment::{valid_actions, Action, AgentLocalState, LatticePos};
use ipp_core::gridmap::{footprint, ImportanceWeights, OccupancyGrid, SensorModel};
use ipp_tensor::{Graph, ParamStore, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weighted binary entropy in bits, written directly from its definition.
pub fn entropy_oracle(p: f64, w1: f64, w2: f64) -> f64 {
    let weight = |q: f64| {
        if q > 0.5 {
            w1
        } else if q < 0.5 {
            w2
        } else {
            0.5
        }
    };
    let term = |q: f64| if q == 0.0 { 0.0 } else { q * q.ln() / std::f64::consts::LN_2 };
    -(weight(p) * term(p) + weight(1.0 - p) * term(1.0 - p))
}

/// Discounted Monte Carlo return from every step.
pub fn monte_carlo_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            rewards[t..]
                .iter()
                .enumerate()
                .map(|(k, r)| gamma.powi(k as i32) * r)
                .sum()
        })
        .collect()
}

/// λ-return as an explicit weighted sum of n-step returns.
pub fn forward_view_lambda(rewards: &[f64], q: &[f64], lambda: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    let nstep = |t: usize, k: usize| -> f64 {
        // k-step return from t, bootstrapping with q[t+k] when it exists
        let mut g = 0.0;
        for i in 0..k.min(n - t) {
            g += gamma.powi(i as i32) * rewards[t + i];
        }
        if t + k < n {
            g += gamma.powi(k as i32) * q[t + k];
        }
        g
    };
    (0..n)
        .map(|t| {
            let horizon = n - t;
            let mut g = 0.0;
            for k in 1..horizon {
                g += (1.0 - lambda) * lambda.powi(k as i32 - 1) * nstep(t, k);
            }
            g + lambda.powi(horizon as i32 - 1) * nstep(t, horizon)
        })
        .collect()
}

/// Bayesian posterior of one cell after a binary observation.
fn posterior(p: f64, z: bool, acc: f64) -> f64 {
    let l1 = if z { acc } else { 1.0 - acc };
    let l0 = 1.0 - l1;
    let num = p * l1;
    let den = num + (1.0 - p) * l0;
    if den == 0.0 {
        p
    } else {
        num / den
    }
}

/// Expected weighted-entropy reduction of observing `cells`, by enumerating
/// every joint observation outcome.
pub fn exhaustive_gain(cells: &[f64], acc: f64, w1: f64, w2: f64) -> f64 {
    let k = cells.len();
    let before: f64 = cells.iter().map(|&p| entropy_oracle(p, w1, w2)).sum();
    let mut expected = 0.0;
    for outcome in 0..(1u32 << k) {
        let mut prob = 1.0;
        let mut after = 0.0;
        for (j, &p) in cells.iter().enumerate() {
            let z = outcome >> j & 1 == 1;
            let pz = if z {
                p * acc + (1.0 - p) * (1.0 - acc)
            } else {
                p * (1.0 - acc) + (1.0 - p) * acc
            };
            prob *= pz;
            after += entropy_oracle(posterior(p, z, acc), w1, w2);
        }
        expected += prob * after;
    }
    before - expected
}

/// A random greedy-planning instance whose footprints hold at most four
/// cells and whose observations are independent per cell.
pub struct GreedyInstance {
    pub cfg: EnvConfig,
    pub local: AgentLocalState,
    pub w1: f64,
    pub w2: f64,
}

pub fn greedy_instance(rng: &mut ChaCha8Rng) -> GreedyInstance {
    let w1: f64 = rng.random_range(0.05..0.95);
    let w2 = 1.0 - w1;
    let acc_low: f64 = rng.random_range(0.6..0.999);
    let acc_high: f64 = rng.random_range(0.51..acc_low);
    let cfg = EnvConfig {
        terrain_side: 6.0,
        map_resolution: 1.0,
        planning_resolution: 2.0,
        min_altitude: 10.0,
        max_altitude: 14.0,
        altitude_step: 4.0,
        num_agents: 1,
        budget: 5,
        comm_radius: f64::INFINITY,
        sensor: SensorModel::new(vec![(10.0, acc_low), (14.0, acc_high)]).unwrap(),
        weights: ImportanceWeights::new(w1, w2).unwrap(),
        footprint_factor: 0.12,
        coverage_altitude: 10.0,
        ..EnvConfig::default()
    };
    let levels = [0.5, 0.1, 0.9, 0.3, 0.7, 0.0001, 0.9999];
    let probs: Vec<f64> = (0..36)
        .map(|_| {
            if rng.random_bool(0.3) {
                levels[rng.random_range(0..levels.len())]
            } else {
                rng.random_range(0.0001..0.9999)
            }
        })
        .collect();
    let map = OccupancyGrid::from_probabilities(6, 6, 1.0, probs).unwrap();
    let position = LatticePos::new(rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..2));
    let local = AgentLocalState {
        id: 0,
        num_agents: 1,
        map,
        position,
        known_positions: vec![position],
        budget: 5,
        last_measurement: None,
        heard: Vec::new(),
    };
    GreedyInstance { cfg, local, w1, w2 }
}

/// Action maximising [`exhaustive_gain`], earlier actions winning ties.
pub fn exhaustive_greedy_choice(inst: &GreedyInstance) -> Action {
    let cfg = &inst.cfg;
    let mask = valid_actions(&[inst.local.position], 0, cfg);
    let mut best: Option<(Action, f64)> = None;
    for a in Action::ALL {
        if !mask[a.index()] {
            continue;
        }
        let t = inst.local.position.moved(a, cfg).unwrap();
        let pos = t.meters(cfg);
        let rect = footprint(pos, cfg.footprint_factor, 6, 6, 1.0).unwrap();
        assert!(rect.area() <= 4);
        let cells: Vec<f64> = rect.cells().map(|(x, y)| inst.local.map.probability(x, y)).collect();
        let acc = cfg.sensor.accuracy(pos[2]).unwrap();
        let g = exhaustive_gain(&cells, acc, inst.w1, inst.w2);
        match best {
            Some((_, b)) if g <= b + 1e-12 * b.abs().max(1.0) => {}
            _ => best = Some((a, g)),
        }
    }
    best.unwrap().0
}

/// Small network sizes for gradient checks.
pub fn toy_net() -> NetConfig {
    NetConfig {
        conv_channels: vec![2, 3],
        conv_strides: vec![1, 2],
        hidden: vec![4],
    }
}

/// Two agents on a 4 x 4 lattice with a coarse map.
pub fn toy_config() -> Config {
    let mut cfg = Config::default();
    cfg.env = EnvConfig {
        terrain_side: 20.0,
        map_resolution: 2.5,
        num_agents: 2,
        budget: 4,
        ..EnvConfig::default()
    };
    cfg.net = toy_net();
    cfg
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Replaces every parameter with a uniform draw from [-0.5, 0.5] so that no
/// ReLU input sits exactly on its kink (zero biases on all-zero planes would).
pub fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.value_mut(id).data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
}

/// Largest relative error between the analytic parameter gradient of the
/// scalar built by `build` and central finite differences.
pub fn param_gradient_error<F>(store: &mut ParamStore, build: F) -> f64
where
    F: Fn(&mut Graph, &ParamStore) -> Var,
{
    const H: f64 = 1e-5;
    let eval = |s: &ParamStore| {
        let mut g = Graph::new();
        let loss = build(&mut g, s);
        g.value(loss).data()[0]
    };
    store.zero_grad();
    let mut g = Graph::new();
    let loss = build(&mut g, store);
    g.backward(loss, store).unwrap();
    let ids: Vec<_> = store.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = store.grad(id).clone();
        for i in 0..store.value(id).numel() {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + H;
            let fp = eval(store);
            store.value_mut(id).data_mut()[i] = orig - H;
            let fm = eval(store);
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (fp - fm) / (2.0 * H);
            let a = analytic.data()[i];
            // differences far below the step's truncation error carry no signal
            if !(a.is_finite() && numeric.is_finite()) {
                return f64::INFINITY;
            }
            if a.abs().max(numeric.abs()) > 1e-7 {
                worst = worst.max(rel_err(a, numeric));
            }
        }
    }
    worst
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
