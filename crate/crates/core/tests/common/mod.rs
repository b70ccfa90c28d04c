//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use kgwalk_core::env::{EnvConfig, RewardMode, WalkEnv};
use kgwalk_core::kg::{Graph, GraphOptions, Query, Triple};
use kgwalk_core::linalg::Matrix;
use kgwalk_core::policy::{
    greedy_decode, sample_trajectory, surrogate_loss, train_agent, AgentConfig, PolicyParams,
    PolicyShape, TrainState,
};
use kgwalk_core::rng::{stream_rng, Rng, Stream};
use kgwalk_core::scalar::log_softmax;
use kgwalk_core::shaper::{loss_and_grad, training_pairs, ShaperGrad, ShaperKind, ShaperModel};
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> Rng {
    stream_rng(seed, Stream::Synthetic)
}

/// A graph on at most `max_entities` entities and `max_relations` relations
/// with at least one fact.
pub fn random_graph(rng: &mut Rng, max_entities: usize, max_relations: usize, density: f64) -> Graph {
    let n = rng.gen_range(2..=max_entities);
    let r = rng.gen_range(1..=max_relations);
    let mut triples = Vec::new();
    for h in 0..n {
        for rel in 0..r {
            for t in 0..n {
                if rng.gen_bool(density) {
                    triples.push(Triple::new(h, rel, t));
                }
            }
        }
    }
    if triples.is_empty() {
        triples.push(Triple::new(0, 0, 1));
    }
    Graph::build(n, r, triples, GraphOptions::default()).unwrap()
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb < 1e-300 {
        0.0
    } else {
        diff / (na + nb)
    }
}

/// Central differences of `f` over every coordinate of `x`.
pub fn central_differences(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = f(x);
        x[i] = orig - FD_STEP;
        let down = f(x);
        x[i] = orig;
        g.push((up - down) / (2.0 * FD_STEP));
    }
    g
}

pub struct ShaperInstance {
    pub graph: Graph,
    pub model: ShaperModel<f64>,
}

pub fn shaper_instance(seed: u64, kind: ShaperKind) -> ShaperInstance {
    let mut rng = rng(seed);
    let graph = random_graph(&mut rng, 6, 3, 0.3);
    let dim = rng.gen_range(1..=8);
    let width = kind.row_width(dim);
    let mut uniform = |_: usize, _: usize| rng.gen_range(-1.0..1.0);
    let entity = Matrix::from_fn(graph.num_entities(), width, &mut uniform);
    let relation = Matrix::from_fn(graph.num_relations(), width, &mut uniform);
    let model = ShaperModel::from_parts(kind, dim, entity, relation).unwrap();
    ShaperInstance { graph, model }
}

/// Relative error between the analytic and numerical gradient of the
/// shaper loss on one random instance.
pub fn shaper_gradient_error(seed: u64, kind: ShaperKind) -> f64 {
    let ShaperInstance { graph, model } = shaper_instance(seed, kind);
    let pairs = training_pairs(&graph);
    let (eps, l2) = (0.1, 1e-3);
    let mut grad = ShaperGrad::zeros_like(&model);
    loss_and_grad(&model, &graph, &pairs, eps, l2, Some(&mut grad));
    let mut analytic = grad.entity.to_f64_vec();
    analytic.extend(grad.relation.to_f64_vec());

    let ne = model.entity_emb.as_slice().len();
    let mut x = model.entity_emb.to_f64_vec();
    x.extend(model.relation_emb.to_f64_vec());
    let mut probe = model.clone();
    let numeric = central_differences(&mut x, |x| {
        probe.entity_emb.as_mut_slice().copy_from_slice(&x[..ne]);
        probe.relation_emb.as_mut_slice().copy_from_slice(&x[ne..]);
        loss_and_grad(&probe, &graph, &pairs, eps, l2, None)
    });
    relative_error(&analytic, &numeric)
}

fn flatten(params: &PolicyParams<f64>) -> Vec<f64> {
    params.blocks().iter().flat_map(|b| b.iter().copied()).collect()
}

fn unflatten(params: &mut PolicyParams<f64>, x: &[f64]) {
    let mut off = 0;
    for block in params.blocks_mut() {
        block.copy_from_slice(&x[off..off + block.len()]);
        off += block.len();
    }
}

/// Relative error between the analytic and numerical gradient of the
/// REINFORCE surrogate (with entropy bonus) on one random instance, T = 2.
pub fn surrogate_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let graph = random_graph(&mut rng, 6, 3, 0.25);
    let shape = PolicyShape {
        num_entities: graph.num_entities(),
        relation_slots: graph.relation_slots(),
        entity_dim: rng.gen_range(1..=8),
        hidden_dim: rng.gen_range(1..=8),
    };
    let params = PolicyParams::<f64>::init(shape, &mut rng);
    let config = EnvConfig {
        horizon: 2,
        reward_mode: RewardMode::Binary,
        mask_query_edge: true,
    };
    let env = WalkEnv::new(&graph, config, None).unwrap();
    let facts = graph.facts().to_vec();
    let mut batch = Vec::new();
    for _ in 0..rng.gen_range(1..=6) {
        let fact = facts[rng.gen_range(0..facts.len())];
        let mut traj = sample_trajectory(&params, &env, Query::from_triple(&fact), &mut rng).unwrap();
        traj.reward = rng.gen_range(0.0..1.0);
        batch.push(traj);
    }
    let baseline = rng.gen_range(0.0..1.0);
    let beta = 0.05;

    let mut grad = PolicyParams::zeros(shape);
    surrogate_loss(&params, &env, &batch, baseline, beta, Some(&mut grad)).unwrap();
    let analytic = flatten(&grad);
    let mut x = flatten(&params);
    let mut probe = params.clone();
    let numeric = central_differences(&mut x, |x| {
        unflatten(&mut probe, x);
        surrogate_loss(&probe, &env, &batch, baseline, beta, None).unwrap().loss
    });
    relative_error(&analytic, &numeric)
}

/// Every length-`T` action sequence from the query source with its summed
/// log-probability; end entities keep their best score.
pub fn enumerate_ranking(
    params: &PolicyParams<f64>,
    env: &WalkEnv,
    query: Query,
) -> (usize, Vec<(usize, f64)>) {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    let mut paths = 0;
    let mut stack = vec![(
        env.reset(query).unwrap(),
        kgwalk_core::policy::Memory::zeros(params.hidden_dim()),
        0.0f64,
    )];
    while let Some((state, memory, score)) = stack.pop() {
        if state.step == env.horizon() {
            paths += 1;
            let e = best.entry(state.current).or_insert(f64::NEG_INFINITY);
            *e = e.max(score);
            continue;
        }
        let actions = env.actions(&state);
        let input = kgwalk_core::policy::StepInput {
            previous_relation: state.previous_relation().unwrap_or(env.graph().no_op()),
            current: state.current,
            query_relation: state.query.relation,
        };
        let (next_memory, logits) = params.step(&memory, input, &actions).unwrap();
        for (a, lp) in log_softmax(&logits).into_iter().enumerate() {
            let next = env.step(&state, a).unwrap();
            stack.push((next, next_memory.clone(), score + lp));
        }
    }
    let mut ranked: Vec<(usize, f64)> = best.into_iter().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    (paths, ranked)
}

/// Number of length-`horizon` walks from `source`.
pub fn count_paths(graph: &Graph, source: usize, horizon: usize) -> usize {
    let mut counts = vec![1usize; graph.num_entities()];
    for _ in 0..horizon {
        counts = (0..graph.num_entities())
            .map(|e| graph.actions_of(e).iter().map(|a| counts[a.target]).sum())
            .collect();
    }
    counts[source]
}

pub struct BeamInstance {
    pub graph: Graph,
    pub params: PolicyParams<f64>,
    pub query: Query,
    pub horizon: usize,
    pub paths: usize,
}

/// A random graph, policy and query whose walks number at most `max_paths`.
pub fn beam_instance(seed: u64, max_paths: usize) -> BeamInstance {
    let mut rng = rng(seed);
    loop {
        let graph = random_graph(&mut rng, 6, 3, 0.15);
        let horizon = rng.gen_range(1..=3);
        let source = rng.gen_range(0..graph.num_entities());
        let paths = count_paths(&graph, source, horizon);
        if paths > max_paths {
            continue;
        }
        let shape = PolicyShape {
            num_entities: graph.num_entities(),
            relation_slots: graph.relation_slots(),
            entity_dim: 4,
            hidden_dim: 8,
        };
        let params = PolicyParams::init(shape, &mut rng);
        let query = Query::new(source, rng.gen_range(0..graph.num_relations()));
        return BeamInstance {
            graph,
            params,
            query,
            horizon,
            paths,
        };
    }
}

/// `e0 -r-> e1 -r-> e2 -r-> e3 -r-> e4`.
pub fn chain_graph() -> Graph {
    let triples = (0..4).map(|i| Triple::new(i, 0, i + 1));
    Graph::build(5, 1, triples, GraphOptions::default()).unwrap()
}

pub fn chain_config(seed: u64) -> AgentConfig {
    AgentConfig {
        mask_query_edge: false,
        eval_every: 0,
        batch_size: 4,
        seed,
        ..AgentConfig::default()
    }
}

/// Trains binary REINFORCE on the chain one epoch at a time and returns the
/// first epoch after which greedy decoding answers every query.
pub fn chain_epochs_to_solve(seed: u64, max_epochs: usize) -> Option<usize> {
    let graph = chain_graph();
    let mut cfg = chain_config(seed);
    let env_cfg = EnvConfig {
        horizon: cfg.horizon,
        reward_mode: RewardMode::Binary,
        mask_query_edge: cfg.mask_query_edge,
    };
    let env = WalkEnv::new(&graph, env_cfg, None).unwrap();
    let queries: Vec<Query> = graph.facts().iter().map(Query::from_triple).collect();
    let mut state = TrainState::<f64>::new(&cfg, cfg.shape_for(5, graph.relation_slots()));
    for epoch in 1..=max_epochs {
        cfg.epochs = epoch;
        state = train_agent(state, &env, &queries, &cfg, None, |_| {}).unwrap().last;
        let solved = queries.iter().all(|q| {
            let (end, _) = greedy_decode(&state.params, &env, q.without_answer()).unwrap();
            Some(end) == q.answer
        });
        if solved {
            eprintln!("seed {seed}: solved after {epoch} epochs");
            return Some(epoch);
        }
    }
    None
}
