mod common;

use common::{beam_instance, enumerate_ranking};
use kgwalk_core::env::{EnvConfig, RewardMode, WalkEnv};
use kgwalk_core::policy::{beam_decode, greedy_decode};

fn env_for(inst: &common::BeamInstance) -> WalkEnv<'_> {
    let cfg = EnvConfig {
        horizon: inst.horizon,
        reward_mode: RewardMode::Binary,
        mask_query_edge: false,
    };
    WalkEnv::new(&inst.graph, cfg, None).unwrap()
}

#[test]
fn full_width_beam_equals_enumeration() {
    for seed in 0..100 {
        let inst = beam_instance(seed, 200);
        let env = env_for(&inst);
        let (paths, expected) = enumerate_ranking(&inst.params, &env, inst.query);
        assert_eq!(paths, inst.paths);
        for width in [paths, paths + 7] {
            let got = beam_decode(&inst.params, &env, inst.query, width).unwrap();
            assert_eq!(got, expected, "seed {seed}, width {width}");
        }
    }
}

#[test]
fn narrow_beam_top_never_beats_enumeration() {
    for seed in 0..50 {
        let inst = beam_instance(seed, 200);
        let env = env_for(&inst);
        let (_, expected) = enumerate_ranking(&inst.params, &env, inst.query);
        let got = beam_decode(&inst.params, &env, inst.query, 2).unwrap();
        assert!(got[0].1 <= expected[0].1);
        let (end, score) = greedy_decode(&inst.params, &env, inst.query).unwrap();
        let single = beam_decode(&inst.params, &env, inst.query, 1).unwrap();
        assert_eq!(single, vec![(end, score)]);
    }
}
