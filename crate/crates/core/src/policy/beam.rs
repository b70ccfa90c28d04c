use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::network::{Memory, PolicyParams, StepInput};
use crate::env::{EpisodeState, WalkEnv};
use crate::error::Result;
use crate::kg::Query;
use crate::scalar::{log_softmax, Scalar};

struct Beam<T> {
    state: EpisodeState,
    memory: Memory<T>,
    score: T,
}

fn input_of(env: &WalkEnv, state: &EpisodeState) -> StepInput {
    StepInput {
        previous_relation: state.previous_relation().unwrap_or(env.graph().no_op()),
        current: state.current,
        query_relation: state.query.relation,
    }
}

/// Beam search over `horizon` steps, maximizing cumulative log-probability.
///
/// Candidates are ordered by score, then by parent beam and action index, so
/// width 1 is exactly greedy decoding. End entities keep their best path
/// score; the result is sorted by score descending, then entity id.
pub fn beam_decode<T: Scalar>(
    params: &PolicyParams<T>,
    env: &WalkEnv,
    query: Query,
    width: usize,
) -> Result<Vec<(usize, f64)>> {
    let width = width.max(1);
    let mut beams = vec![Beam {
        state: env.reset(query)?,
        memory: Memory::zeros(params.hidden_dim()),
        score: T::zero(),
    }];
    for _ in 0..env.horizon() {
        let mut candidates: Vec<(T, usize, usize)> = Vec::new();
        let mut memories = Vec::with_capacity(beams.len());
        for (b, beam) in beams.iter().enumerate() {
            let actions = env.actions(&beam.state);
            let (memory, logits) = params.step(&beam.memory, input_of(env, &beam.state), &actions)?;
            for (a, lp) in log_softmax(&logits).into_iter().enumerate() {
                candidates.push((beam.score + lp, b, a));
            }
            memories.push(memory);
        }
        candidates.sort_by(|x, y| {
            y.0.partial_cmp(&x.0)
                .unwrap_or(Ordering::Equal)
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });
        candidates.truncate(width);
        let mut next = Vec::with_capacity(candidates.len());
        for (score, b, a) in candidates {
            next.push(Beam {
                state: env.step(&beams[b].state, a)?,
                memory: memories[b].clone(),
                score,
            });
        }
        beams = next;
    }
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for beam in &beams {
        let s = beam.score.as_f64();
        best.entry(beam.state.current)
            .and_modify(|v| *v = v.max(s))
            .or_insert(s);
    }
    let mut ranked: Vec<(usize, f64)> = best.into_iter().collect();
    ranked.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap_or(Ordering::Equal).then(x.0.cmp(&y.0)));
    Ok(ranked)
}

/// Follows the most probable action at every step (lowest index on ties).
pub fn greedy_decode<T: Scalar>(
    params: &PolicyParams<T>,
    env: &WalkEnv,
    query: Query,
) -> Result<(usize, f64)> {
    let mut state = env.reset(query)?;
    let mut memory = Memory::zeros(params.hidden_dim());
    let mut score = T::zero();
    for _ in 0..env.horizon() {
        let actions = env.actions(&state);
        let (next, logits) = params.step(&memory, input_of(env, &state), &actions)?;
        let lps = log_softmax(&logits);
        let mut arg = 0;
        for (i, &lp) in lps.iter().enumerate() {
            if lp > lps[arg] {
                arg = i;
            }
        }
        score = score + lps[arg];
        memory = next;
        state = env.step(&state, arg)?;
    }
    Ok((state.current, score.as_f64()))
}
