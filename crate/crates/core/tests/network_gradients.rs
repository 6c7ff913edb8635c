//! Finite-difference checks of the full actor and critic loss graphs.

mod common;

use common::{param_gradient_error, randomize, seeded, toy_config};
use ipp_core::environment::{generate_terrain, Action, Environment};
use ipp_core::policy::{build_actor_features, build_critic_features, Actor, Critic, CriticInput};
use rand::Rng;

fn toy_env(seed: u64) -> Environment {
    let cfg = toy_config();
    let terrain = generate_terrain(&mut seeded(seed), &cfg.env);
    let mut env = Environment::new(cfg.env.clone(), terrain, seed).unwrap();
    env.step(&[Action::North, Action::Up]).unwrap();
    env
}

#[test]
fn actor_policy_gradient_matches_finite_differences() {
    let cfg = toy_config();
    let env = toy_env(1);
    let mut actor = Actor::new(&cfg.env, &cfg.features, &cfg.net, &mut seeded(2)).unwrap();
    let feats: Vec<Vec<f64>> = (0..2)
        .map(|i| build_actor_features(env.local(i), env.cfg(), &cfg.features).unwrap().data)
        .collect();
    let masks: Vec<bool> = (0..2).flat_map(|i| env.valid_actions(i)).collect();
    let taken: Vec<usize> = (0..2)
        .map(|i| env.valid_actions(i).iter().position(|&m| m).unwrap())
        .collect();
    let adv = [0.7, -1.3];
    randomize(&mut actor.net.store, &mut seeded(6));
    let net = actor.net.clone();
    let err = param_gradient_error(&mut actor.net.store, |g, store| {
        let mut n = net.clone();
        n.store = store.clone();
        let refs: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
        let x = n.input(g, &refs).unwrap();
        let logits = n.forward(g, x).unwrap();
        let p = g.masked_bounded_softmax(logits, &masks, 0.1).unwrap();
        let picked = g.gather(p, &taken).unwrap();
        let lp = g.ln(picked);
        let weighted = g.mul_const(lp, &[-adv[0], -adv[1]]).unwrap();
        g.mean(weighted)
    });
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn critic_regression_gradient_matches_finite_differences() {
    let cfg = toy_config();
    let env = toy_env(3);
    for input in [CriticInput::Local, CriticInput::Global, CriticInput::GlobalWithActions] {
        let mut critic = Critic::new(&cfg.env, &cfg.features, input, &cfg.net, 6, &mut seeded(4)).unwrap();
        let actions = [Action::East, Action::Down];
        let feats: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                build_critic_features(env.global(), env.local(i), &actions, env.cfg(), &cfg.features, input)
                    .unwrap()
                    .data
            })
            .collect();
        let mut rng = seeded(5);
        let targets: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        randomize(&mut critic.net.store, &mut seeded(7));
        let net = critic.net.clone();
        let err = param_gradient_error(&mut critic.net.store, |g, store| {
            let mut n = net.clone();
            n.store = store.clone();
            let refs: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
            let x = n.input(g, &refs).unwrap();
            let q = n.forward(g, x).unwrap();
            let picked = g.gather(q, &[2, 5]).unwrap();
            g.mse(picked, &targets).unwrap()
        });
        assert!(err < 1e-4, "{}: relative error {err}", input.name());
    }
}
