//! REINFORCE with a moving-average baseline and an entropy bonus.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::network::{Memory, PolicyParams, PolicyShape, StepCache, StepInput};
use crate::env::WalkEnv;
use crate::error::{Error, Result};
use crate::kg::{Edge, Query};
use crate::linalg::{AdamConfig, AdamSlot};
use crate::rng::{stream_rng, Rng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub entity_dim: usize,
    pub hidden_dim: usize,
    pub horizon: usize,
    pub learning_rate: f64,
    /// λ in `baseline ← λ·baseline + (1−λ)·mean(R)`.
    pub baseline_decay: f64,
    pub entropy_weight: f64,
    pub entropy_decay: f64,
    pub entropy_decay_every: usize,
    pub epochs: usize,
    /// Rollouts per update.
    pub batch_size: usize,
    pub rollouts_per_query: usize,
    pub beam_width: usize,
    /// Dev evaluation period in epochs (0 disables it).
    pub eval_every: usize,
    pub mask_query_edge: bool,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            entity_dim: 32,
            hidden_dim: 64,
            horizon: 3,
            learning_rate: 1e-3,
            baseline_decay: 0.95,
            entropy_weight: 0.02,
            entropy_decay: 0.9,
            entropy_decay_every: 50,
            epochs: 1000,
            batch_size: 128,
            rollouts_per_query: 4,
            beam_width: 32,
            eval_every: 50,
            mask_query_edge: true,
            seed: 42,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("entity_dim", self.entity_dim),
            ("hidden_dim", self.hidden_dim),
            ("horizon", self.horizon),
            ("batch_size", self.batch_size),
            ("rollouts_per_query", self.rollouts_per_query),
            ("beam_width", self.beam_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.baseline_decay) {
            return Err(Error::Validation("baseline_decay must lie in [0, 1]".into()));
        }
        if !(self.entropy_weight >= 0.0) || !(self.entropy_decay > 0.0) {
            return Err(Error::Validation("entropy weight/decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn shape_for(&self, num_entities: usize, relation_slots: usize) -> PolicyShape {
        PolicyShape {
            num_entities,
            relation_slots,
            entity_dim: self.entity_dim,
            hidden_dim: self.hidden_dim,
        }
    }
}

/// One sampled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub query: Query,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub end: usize,
    pub reward: f64,
}

fn step_input(env: &WalkEnv, state: &crate::env::EpisodeState) -> StepInput {
    StepInput {
        previous_relation: state.previous_relation().unwrap_or(env.graph().no_op()),
        current: state.current,
        query_relation: state.query.relation,
    }
}

fn entropy<T: Scalar>(log_probs: &[T]) -> T {
    -log_probs.iter().map(|&l| l.exp() * l).sum::<T>()
}

/// Samples `horizon` actions from the policy and scores the end entity.
pub fn sample_trajectory<T: Scalar>(
    params: &PolicyParams<T>,
    env: &WalkEnv,
    query: Query,
    rng: &mut Rng,
) -> Result<Trajectory> {
    let mut state = env.reset(query)?;
    let mut memory = Memory::zeros(params.hidden_dim());
    let horizon = env.horizon();
    let mut actions = Vec::with_capacity(horizon);
    let mut log_probs = Vec::with_capacity(horizon);
    let mut entropies = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let edges = env.actions(&state);
        let (next_memory, cache) = params.step_cached(&memory, step_input(env, &state), &edges)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut choice = cache.log_probs.len() - 1;
        for (i, lp) in cache.log_probs.iter().enumerate() {
            acc += lp.as_f64().exp();
            if u < acc {
                choice = i;
                break;
            }
        }
        actions.push(choice);
        log_probs.push(cache.log_probs[choice].as_f64());
        entropies.push(entropy(&cache.log_probs).as_f64());
        memory = next_memory;
        state = env.step(&state, choice)?;
    }
    let reward = env.terminal_reward(&state)?;
    Ok(Trajectory {
        query,
        actions,
        log_probs,
        entropies,
        end: state.current,
        reward,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateValue {
    pub loss: f64,
    pub mean_reward: f64,
    pub mean_entropy: f64,
}

/// REINFORCE surrogate for a fixed batch of action sequences:
///
/// `L = −1/B Σ_b (R_b − baseline)·Σ_t log π(a_t|s_t) − β/(B·T) Σ_b Σ_t H_t`
///
/// Rewards and the baseline are constants, so `L` is a smooth function of the
/// parameters. When `grad` is given it receives `∂L/∂θ` (overwritten).
pub fn surrogate_loss<T: Scalar>(
    params: &PolicyParams<T>,
    env: &WalkEnv,
    batch: &[Trajectory],
    baseline: f64,
    entropy_weight: f64,
    mut grad: Option<&mut PolicyParams<T>>,
) -> Result<SurrogateValue> {
    if batch.is_empty() {
        return Err(Error::Validation("empty trajectory batch".into()));
    }
    if let Some(g) = grad.as_deref_mut() {
        g.fill_zero();
    }
    let b = T::lit(batch.len() as f64);
    let beta = T::lit(entropy_weight);
    let mut loss = T::zero();
    let mut entropy_sum = T::zero();
    let mut steps = 0usize;
    for traj in batch {
        let advantage = T::lit(traj.reward - baseline);
        let mut state = env.reset(traj.query)?;
        let mut memory = Memory::zeros(params.hidden_dim());
        let mut caches: Vec<(StepCache<T>, Vec<Edge>)> = Vec::with_capacity(traj.actions.len());
        let mut path_log_prob = T::zero();
        for &a in &traj.actions {
            let edges = env.actions(&state).into_owned();
            let (next, cache) = params.step_cached(&memory, step_input(env, &state), &edges)?;
            if a >= edges.len() {
                return Err(Error::Action(format!("replayed action {a} out of range")));
            }
            path_log_prob = path_log_prob + cache.log_probs[a];
            entropy_sum = entropy_sum + entropy(&cache.log_probs);
            steps += 1;
            state = env.step(&state, a)?;
            memory = next;
            caches.push((cache, edges));
        }
        loss = loss - advantage * path_log_prob / b;

        if let Some(g) = grad.as_deref_mut() {
            let horizon = T::lit(traj.actions.len() as f64);
            let ent_scale = beta / (b * horizon);
            let pg_scale = advantage / b;
            let mut dmem = Memory::zeros(params.hidden_dim());
            for (t, (cache, edges)) in caches.iter().enumerate().rev() {
                let lp = &cache.log_probs;
                let h = entropy(lp);
                let dlogits: Vec<T> = lp
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| {
                        let p = l.exp();
                        let chosen = if j == traj.actions[t] { T::one() } else { T::zero() };
                        -pg_scale * (chosen - p) + ent_scale * p * (l + h)
                    })
                    .collect();
                dmem = params.backward_step(cache, edges, &dlogits, &dmem, g);
            }
        }
    }
    // Every episode lasts the horizon, so steps == B·T.
    let mean_entropy = entropy_sum / T::lit(steps.max(1) as f64);
    loss = loss - beta * mean_entropy;
    let mean_reward = batch.iter().map(|t| t.reward).sum::<f64>() / batch.len() as f64;
    Ok(SurrogateValue {
        loss: loss.as_f64(),
        mean_reward,
        mean_entropy: mean_entropy.as_f64(),
    })
}

/// Adam state for every parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOptimizer<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub slots: Vec<AdamSlot<T>>,
}

impl<T: Scalar> PolicyOptimizer<T> {
    pub fn new(params: &PolicyParams<T>, learning_rate: f64) -> Self {
        Self {
            config: AdamConfig::with_learning_rate(learning_rate),
            step: 0,
            slots: params.blocks().iter().map(|b| AdamSlot::new(b.len())).collect(),
        }
    }

    pub fn apply(&mut self, params: &mut PolicyParams<T>, grad: &PolicyParams<T>) {
        self.step += 1;
        for ((slot, p), g) in self
            .slots
            .iter_mut()
            .zip(params.blocks_mut())
            .zip(grad.blocks())
        {
            slot.apply(&self.config, self.step, p, g);
        }
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub params: PolicyParams<T>,
    pub optimizer: PolicyOptimizer<T>,
    pub baseline: f64,
    pub entropy_weight: f64,
    pub rng: Rng,
    pub epoch: usize,
}

impl<T: Scalar> TrainState<T> {
    /// Fresh state: parameters from the policy-init stream, rollouts from the
    /// rollout stream of `cfg.seed`.
    pub fn new(cfg: &AgentConfig, shape: PolicyShape) -> Self {
        let mut init_rng = stream_rng(cfg.seed, Stream::PolicyInit);
        let params = PolicyParams::init(shape, &mut init_rng);
        Self::from_params(cfg, params)
    }

    pub fn from_params(cfg: &AgentConfig, params: PolicyParams<T>) -> Self {
        let optimizer = PolicyOptimizer::new(&params, cfg.learning_rate);
        Self {
            params,
            optimizer,
            baseline: 0.0,
            entropy_weight: cfg.entropy_weight,
            rng: stream_rng(cfg.seed, Stream::Rollout),
            epoch: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub loss: f64,
    pub mean_reward: f64,
    pub mean_entropy: f64,
    pub baseline: f64,
}

/// One policy-gradient step on `batch`, then the baseline update.
pub fn reinforce_update<T: Scalar>(
    state: &mut TrainState<T>,
    env: &WalkEnv,
    batch: &[Trajectory],
    baseline_decay: f64,
) -> Result<BatchStats> {
    let mut grad = PolicyParams::zeros(state.params.shape());
    let value = surrogate_loss(
        &state.params,
        env,
        batch,
        state.baseline,
        state.entropy_weight,
        Some(&mut grad),
    )?;
    if !value.loss.is_finite() || !grad.is_finite() {
        let bad = PolicyParams::<T>::BLOCK_NAMES
            .iter()
            .zip(grad.blocks())
            .find(|(_, b)| b.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| *n)
            .unwrap_or("loss");
        return Err(Error::Training {
            epoch: state.epoch,
            message: format!("non-finite gradient in {bad} (loss {})", value.loss),
        });
    }
    state.optimizer.apply(&mut state.params, &grad);
    state.baseline = baseline_decay * state.baseline + (1.0 - baseline_decay) * value.mean_reward;
    Ok(BatchStats {
        loss: value.loss,
        mean_reward: value.mean_reward,
        mean_entropy: value.mean_entropy,
        baseline: state.baseline,
    })
}
