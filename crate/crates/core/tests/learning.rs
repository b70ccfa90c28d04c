mod common;

use common::chain_epochs_to_solve;
use kgwalk_core::kg::{Graph, GraphOptions, Triple};
use kgwalk_core::shaper::{loss_and_grad, train_shaper, training_pairs, ShaperKind, TrainConfig};
use kgwalk_core::Shaper;

#[test]
fn chain_is_solved_by_binary_reinforce() {
    for seed in [1, 2, 3] {
        let epoch = chain_epochs_to_solve(seed, 200);
        assert!(epoch.is_some(), "seed {seed} did not reach hits@1 = 1 in 200 epochs");
    }
}

fn tiny_graph() -> Graph {
    let triples = [
        Triple::new(0, 0, 1),
        Triple::new(1, 0, 2),
        Triple::new(2, 1, 0),
        Triple::new(3, 1, 4),
        Triple::new(4, 0, 3),
        Triple::new(0, 1, 4),
    ];
    Graph::build(5, 2, triples, GraphOptions::default()).unwrap()
}

#[test]
fn shaper_ranks_facts_above_non_facts_after_training() {
    let graph = tiny_graph();
    for kind in [ShaperKind::DistMult, ShaperKind::ComplEx] {
        let cfg = TrainConfig {
            dim: 16,
            epochs: 200,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let model: Shaper = train_shaper(&graph, kind, &cfg).unwrap();
        for (h, r) in training_pairs(&graph) {
            let answers = graph.answers(h, r);
            let scores = model.score_tails(h, r);
            let worst_fact = answers.iter().map(|&t| scores[t]).fold(f64::INFINITY, f64::min);
            let best_other = (0..5)
                .filter(|t| !answers.contains(t))
                .map(|t| scores[t])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(worst_fact > best_other, "{kind}: ({h}, {r}) {scores:?}");
        }
    }
}

#[test]
fn full_batch_loss_decreases_over_first_epochs() {
    let graph = tiny_graph();
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: usize::MAX,
        ..TrainConfig::default()
    };
    let model: Shaper = train_shaper(&graph, ShaperKind::DistMult, &cfg).unwrap();
    for w in model.loss_curve.windows(2) {
        assert!(w[1] < w[0], "{:?}", model.loss_curve);
    }
    let pairs = training_pairs(&graph);
    let final_loss = loss_and_grad(&model, &graph, &pairs, cfg.label_smoothing, cfg.l2, None);
    assert!(final_loss < model.loss_curve[0]);
}

