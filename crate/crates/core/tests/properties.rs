mod common;

use std::collections::BTreeSet;

use kgwalk_core::env::{EnvConfig, RewardMode, WalkEnv};
use kgwalk_core::eval::{aggregate_ranks, rank_of_answer, rank_scores, KnownAnswers, RankMode};
use kgwalk_core::kg::{Graph, GraphOptions, Query, Triple};
use kgwalk_core::shaper::{shape, shaped_reward, ShaperKind};
use kgwalk_core::split::{mask_split, verify_split, SplitSpec};
use proptest::prelude::*;

fn triples_strategy() -> impl Strategy<Value = (usize, usize, Vec<Triple>)> {
    (2usize..12, 1usize..4).prop_flat_map(|(n, r)| {
        let triple = (0..n, 0..r, 0..n).prop_map(|(h, rel, t)| Triple::new(h, rel, t));
        (Just(n), Just(r), prop::collection::vec(triple, 1..60))
    })
}

fn build(n: usize, r: usize, triples: &[Triple], inverses: bool) -> Graph {
    let options = GraphOptions {
        self_loops: true,
        inverses,
    };
    Graph::build(n, r, triples.iter().copied(), options).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn graph_indexes_every_fact_and_only_facts((n, r, triples) in triples_strategy(), inverses: bool) {
        let g = build(n, r, &triples, inverses);
        let unique: BTreeSet<Triple> = triples.iter().copied().collect();
        prop_assert_eq!(g.num_facts(), unique.len());
        for t in &unique {
            prop_assert!(g.contains(t));
            prop_assert!(g.actions_of(t.head).iter().any(|e| e.relation == t.relation && e.target == t.tail));
            prop_assert!(g.answers(t.head, t.relation).contains(&t.tail));
            if inverses {
                let inv = g.inverse_of(t.relation);
                prop_assert!(g.actions_of(t.tail).iter().any(|e| e.relation == inv && e.target == t.head));
            }
        }
        for e in 0..n {
            let edges = g.actions_of(e);
            prop_assert!(edges.windows(2).all(|w| (w[0].relation, w[0].target) < (w[1].relation, w[1].target)));
            prop_assert!(edges.iter().any(|a| a.relation == g.self_loop() && a.target == e));
            for a in edges.iter().filter(|a| g.is_reserved(a.relation) || a.relation >= r) {
                prop_assert!(!g.contains(&Triple::new(e, a.relation, a.target)));
            }
        }
    }

    #[test]
    fn split_is_a_consistent_subset(
        (n, r, triples) in triples_strategy(),
        node in 0.0f64..=1.0,
        edge in 0.0f64..=1.0,
        seed: u64,
    ) {
        let rich = build(n, r, &triples, true);
        let spec = SplitSpec { node_mask_ratio: node, edge_mask_ratio: edge, seed, ..SplitSpec::default() };
        let Ok(result) = mask_split(&rich, &spec) else {
            // Degenerate splits (nothing left) are rejected, not returned.
            return Ok(());
        };
        prop_assert_eq!(result.masked_entities.len(), (node * n as f64).floor() as usize);
        for t in result.sparse.facts() {
            prop_assert!(rich.contains(t));
            prop_assert!(!result.masked_entities.contains(&t.head));
            prop_assert!(!result.masked_entities.contains(&t.tail));
        }
        prop_assert_eq!(result.sparse.num_entities(), rich.num_entities());
        prop_assert_eq!(result.sparse.num_relations(), rich.num_relations());
        let report = verify_split(&result, &triples).unwrap();
        prop_assert_eq!(report.violations, 0);
        prop_assert_eq!(report.facts_kept + report.facts_removed_by_nodes + report.facts_removed_by_edges, report.facts_rich);
        let again = mask_split(&rich, &spec).unwrap();
        prop_assert_eq!(again.sparse.facts(), result.sparse.facts());
        prop_assert_eq!(again.masked_entities, result.masked_entities);
    }

    #[test]
    fn metric_bounds_hold(ranks in prop::collection::vec(1usize..50, 1..40)) {
        let rep = aggregate_ranks(&ranks, RankMode::Filtered).unwrap();
        let h = rep.hits;
        prop_assert!(h[0] <= h[1] && h[1] <= h[2] && h[2] <= h[3]);
        prop_assert!(h[0] <= rep.mrr + 1e-12);
        prop_assert!(rep.mrr <= h[3] + (1.0 - h[3]) / 11.0 + 1e-12);
        prop_assert!(rep.mrr > 0.0 && rep.mrr <= 1.0);
    }

    #[test]
    fn filtered_rank_never_exceeds_raw(
        scores in prop::collection::vec(0.0f64..1.0, 2..20),
        known_mask in prop::collection::vec(any::<bool>(), 20),
        answer_seed: usize,
    ) {
        let n = scores.len();
        let answer = answer_seed % n;
        let known_triples: Vec<Triple> = (0..n).filter(|&t| known_mask[t]).map(|t| Triple::new(0, 0, t)).collect();
        let known = KnownAnswers::from_triples(&known_triples);
        let ranked = rank_scores(&scores);
        let q = Query::new(0, 0);
        let raw = rank_of_answer(&ranked, &q, answer, RankMode::Raw, &known, n).unwrap();
        let filt = rank_of_answer(&ranked, &q, answer, RankMode::Filtered, &known, n).unwrap();
        prop_assert!(1 <= filt && filt <= raw && raw <= n);
    }

    #[test]
    fn shaped_reward_lies_between_binary_and_one(binary in prop::bool::ANY, f in 0.0f64..=1.0) {
        let b = if binary { 1.0 } else { 0.0 };
        let r = shape(b, f);
        prop_assert!(r >= b && r <= 1.0);
        if binary {
            prop_assert_eq!(r, 1.0);
        } else {
            prop_assert_eq!(r, f);
        }
    }

    #[test]
    fn walks_are_deterministic((n, r, triples) in triples_strategy(), picks in prop::collection::vec(any::<usize>(), 3)) {
        let g = build(n, r, &triples, true);
        let cfg = EnvConfig { horizon: 3, reward_mode: RewardMode::Binary, mask_query_edge: true };
        let env = WalkEnv::new(&g, cfg, None).unwrap();
        let q = Query::from_triple(&triples[0]);
        let walk = || {
            let mut s = env.reset(q).unwrap();
            for &p in &picks {
                let n_actions = env.actions(&s).len();
                prop_assert!(n_actions > 0);
                s = env.step(&s, p % n_actions).unwrap();
            }
            prop_assert!(env.step(&s, 0).is_err());
            Ok(s)
        };
        let a = walk()?;
        let b = walk()?;
        prop_assert_eq!(a.current, b.current);
        prop_assert_eq!(&a.history, &b.history);
        let reward = env.terminal_reward(&a).unwrap();
        prop_assert!(reward == 0.0 || reward == 1.0);
    }
}

#[test]
fn shaped_reward_of_fact_skips_the_provider() {
    let inst = common::shaper_instance(7, ShaperKind::DistMult);
    let fact = inst.graph.facts()[0];
    let r = shaped_reward(&inst.model, &inst.graph, fact.head, fact.relation, fact.tail).unwrap();
    assert_eq!(r, 1.0);
}
