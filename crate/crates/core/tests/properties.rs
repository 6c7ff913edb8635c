//! Property tests and statistical checks across modules.

mod common;

use std::sync::Arc;

use common::{entropy_oracle, forward_view_lambda, seeded};
use ipp_core::config::{Config, EnvConfig};
use ipp_core::environment::{generate_terrain, Environment};
use ipp_core::evaluation::PlannerSpec;
use ipp_core::gridmap::{
    footprint, fuse_measurement, simulate_measurement, weighted_cell_entropy, GroundTruthMap, ImportanceWeights,
    OccupancyGrid, RngNoise, SensorModel,
};
use ipp_core::planners::PlanContext;
use ipp_core::policy::{Actor, SampleMode};
use ipp_core::raster::{threshold_raster, RasterGrid};
use ipp_core::training::{counterfactual_advantage, td_lambda_targets};
use proptest::prelude::*;

fn half_terrain(n: usize) -> GroundTruthMap {
    let cells = (0..n * n).map(|i| u8::from(i % n < n / 2)).collect();
    GroundTruthMap::new(n, n, 1.0, cells).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn entropy_matches_definition(p in 0.0f64..=1.0, w1 in 0.0f64..=1.0) {
        let w = ImportanceWeights::new(w1, 1.0 - w1).unwrap();
        let a = weighted_cell_entropy(p, &w).unwrap();
        prop_assert!((a - entropy_oracle(p, w1, 1.0 - w1)).abs() < 1e-12);
    }

    #[test]
    fn entropy_peaks_at_one_half_when_interesting_weight_dominates(p in 0.0f64..=1.0, w1 in 0.5f64..=1.0) {
        let w = ImportanceWeights::new(w1, 1.0 - w1).unwrap();
        let peak = weighted_cell_entropy(0.5, &w).unwrap();
        prop_assert!(weighted_cell_entropy(p, &w).unwrap() <= peak + 1e-15);
    }

    #[test]
    fn fusion_commutes_below_saturation(
        seed in any::<u64>(),
        ax in 0.0f64..20.0, ay in 0.0f64..20.0,
        bx in 0.0f64..20.0, by in 0.0f64..20.0,
        la in 0usize..3, lb in 0usize..3,
    ) {
        let gt = half_terrain(20);
        let sensor = SensorModel::new(vec![(5.0, 0.9), (10.0, 0.75), (15.0, 0.6)]).unwrap();
        let mut rng = seeded(seed);
        let alt = |l: usize| 5.0 * (l + 1) as f64;
        let ma = simulate_measurement(&gt, [ax, ay, alt(la)], &sensor, 1.0, &mut RngNoise(&mut rng), 0, 1).unwrap();
        let mb = simulate_measurement(&gt, [bx, by, alt(lb)], &sensor, 1.0, &mut RngNoise(&mut rng), 1, 1).unwrap();
        let mut ab = OccupancyGrid::uniform(20, 20, 1.0);
        fuse_measurement(&mut ab, &ma).unwrap();
        fuse_measurement(&mut ab, &mb).unwrap();
        let mut ba = OccupancyGrid::uniform(20, 20, 1.0);
        fuse_measurement(&mut ba, &mb).unwrap();
        fuse_measurement(&mut ba, &ma).unwrap();
        for (x, y) in ab.probabilities().iter().zip(ba.probabilities()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn footprint_stays_inside_map(x in 0.0f64..=50.0, y in 0.0f64..=50.0, alt in 1.0f64..30.0, factor in 0.1f64..2.0) {
        let r = footprint([x, y, alt], factor, 100, 100, 0.5).unwrap();
        prop_assert!(r.area() > 0);
        prop_assert!(r.fits(100, 100));
    }

    #[test]
    fn raising_threshold_never_adds_interesting_cells(
        values in prop::collection::vec(-50.0f64..50.0, 1..200),
        t1 in -60.0f64..60.0,
        dt in 0.0f64..30.0,
    ) {
        let r = RasterGrid::new(values.len(), 1, 1.0, values).unwrap();
        let low = threshold_raster(&r, t1).unwrap().map.interesting_count();
        let high = threshold_raster(&r, t1 + dt).unwrap().map.interesting_count();
        prop_assert!(high <= low);
    }

    #[test]
    fn counterfactual_advantage_has_zero_policy_mean(
        q in prop::collection::vec(-10.0f64..10.0, 6),
        raw in prop::collection::vec(0.001f64..1.0, 6),
    ) {
        let s: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let mean: f64 = (0..6).map(|u| pi[u] * counterfactual_advantage(&q, &pi, u).unwrap()).sum();
        prop_assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn lambda_targets_match_forward_view(
        rewards in prop::collection::vec(-1.0f64..1.0, 1..20),
        seed in any::<u64>(),
        lambda in 0.0f64..=1.0,
        gamma in 0.5f64..=1.0,
    ) {
        let mut rng = seeded(seed);
        let q: Vec<f64> = rewards.iter().map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let g = td_lambda_targets(&rewards, &q, lambda, gamma).unwrap();
        let oracle = forward_view_lambda(&rewards, &q, lambda, gamma);
        for (a, b) in g.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

fn flip_rate(altitude: f64, accuracy: f64, trials: usize) -> f64 {
    // all-uninteresting terrain: every reported 1 is a flip
    let gt = GroundTruthMap::new(60, 60, 1.0, vec![0; 3600]).unwrap();
    let sensor = SensorModel::new(vec![(5.0, 0.99), (10.0, 0.8), (15.0, accuracy)]).unwrap();
    let block = sensor.block_size(altitude);
    let mut rng = seeded(altitude as u64);
    let (mut flips, mut blocks) = (0usize, 0usize);
    for _ in 0..trials {
        let m = simulate_measurement(&gt, [30.0, 30.0, altitude], &sensor, 1.0, &mut RngNoise(&mut rng), 0, 1).unwrap();
        let r = m.footprint;
        // one draw per block; count each block once through its corner cell
        for by in (0..r.h).step_by(block) {
            for bx in (0..r.w).step_by(block) {
                blocks += 1;
                flips += m.value(r.x0 + bx, r.y0 + by) as usize;
            }
        }
    }
    flips as f64 / blocks as f64
}

#[test]
fn flip_rates_match_sensor_accuracy() {
    let low = flip_rate(5.0, 0.625, 2000);
    assert!((low - 0.01).abs() < 0.003, "{low}");
    let high = flip_rate(15.0, 0.625, 2000);
    assert!((high - 0.375).abs() < 0.01, "{high}");
}

#[test]
fn blocks_report_a_single_label() {
    let gt = GroundTruthMap::new(60, 60, 1.0, vec![0; 3600]).unwrap();
    let sensor = SensorModel::default();
    let mut rng = seeded(3);
    let m = simulate_measurement(&gt, [30.0, 30.0, 15.0], &sensor, 1.0, &mut RngNoise(&mut rng), 0, 1).unwrap();
    let r = m.footprint;
    let k = sensor.block_size(15.0);
    for y in 0..r.h {
        for x in 0..r.w {
            let anchor = m.value(r.x0 + x / k * k, r.y0 + y / k * k);
            assert_eq!(m.value(r.x0 + x, r.y0 + y), anchor);
        }
    }
}

#[test]
fn planners_respect_action_masks() {
    let mut cfg = Config::default();
    cfg.env = EnvConfig {
        map_resolution: 1.0,
        num_agents: 4,
        ..EnvConfig::default()
    };
    let actor = Arc::new(Actor::new(&cfg.env, &cfg.features, &cfg.net, &mut seeded(1)).unwrap());
    let specs = [
        PlannerSpec::Random,
        PlannerSpec::Coverage,
        PlannerSpec::GreedyIg,
        PlannerSpec::Learned(actor, SampleMode::Sample),
    ];
    let mut checked = 0;
    let mut mission = 0;
    while checked < 10_000 {
        let terrain = generate_terrain(&mut seeded(100 + mission), &cfg.env);
        let mut env = Environment::new(cfg.env.clone(), terrain, mission).unwrap();
        let mut planners: Vec<_> = specs.iter().map(|s| s.build()).collect();
        let mut rng = seeded(mission);
        // states come from random moves; every planner is queried in each
        while !env.done() {
            let mut actions = Vec::new();
            for i in 0..env.num_agents() {
                let ctx = PlanContext {
                    cfg: env.cfg(),
                    local: env.local(i),
                    mask: env.valid_actions(i),
                };
                for p in planners.iter_mut() {
                    let a = p.act(&ctx, &mut rng).unwrap();
                    assert!(ctx.mask[a.index()], "{} chose masked {a}", p.name());
                }
                checked += 1;
                actions.push(planners[0].act(&ctx, &mut rng).unwrap());
            }
            env.step(&actions).unwrap();
        }
        mission += 1;
    }
    assert!(checked >= 10_000);
}
