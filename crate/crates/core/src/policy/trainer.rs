use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{PolicyParams, PolicyShape};
use super::reinforce::{
    reinforce_update, sample_trajectory, AgentConfig, PolicyOptimizer, TrainState,
};
use crate::env::WalkEnv;
use crate::error::{Error, Result};
use crate::eval::{evaluate, KnownAnswers, RankMode, RankingReport};
use crate::kg::{Query, Triple};
use crate::linalg::{AdamConfig, AdamSlot};
use crate::rng::RngState;
use crate::scalar::Scalar;

pub const AGENT_FORMAT_VERSION: u32 = 1;

/// Held-out triples used to pick the best checkpoint.
pub struct DevSet<'a> {
    pub env: &'a WalkEnv<'a>,
    pub triples: &'a [Triple],
    pub known: &'a KnownAnswers,
    pub mode: RankMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub reward: f64,
    pub loss: f64,
    pub entropy: f64,
    pub baseline: f64,
    pub dev_hits1: Option<f64>,
    pub dev_mrr: Option<f64>,
}

impl EpochLog {
    /// `epoch=… reward=… loss=… entropy=… baseline=…[ dev_hits1=… dev_mrr=…]`
    pub fn to_line(&self) -> String {
        let mut s = format!(
            "epoch={} reward={:.6} loss={:.6} entropy={:.6} baseline={:.6}",
            self.epoch, self.reward, self.loss, self.entropy, self.baseline
        );
        if let (Some(h), Some(m)) = (self.dev_hits1, self.dev_mrr) {
            s.push_str(&format!(" dev_hits1={h:.6} dev_mrr={m:.6}"));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// State after the last epoch.
    pub last: TrainState<T>,
    /// Snapshot with the best dev MRR (the last state when no dev set is given).
    pub best: TrainState<T>,
    pub best_report: Option<RankingReport>,
    pub log: Vec<EpochLog>,
}

/// Runs epochs `state.epoch..cfg.epochs`. Each epoch shuffles `train`, then
/// updates once per `batch_size / rollouts_per_query` queries.
pub fn train_agent<T: Scalar>(
    mut state: TrainState<T>,
    env: &WalkEnv,
    train: &[Query],
    cfg: &AgentConfig,
    dev: Option<&DevSet>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Validation("no training queries".into()));
    }
    if env.horizon() != cfg.horizon {
        return Err(Error::Validation(format!(
            "environment horizon {} differs from agent horizon {}",
            env.horizon(),
            cfg.horizon
        )));
    }
    let queries_per_batch = (cfg.batch_size / cfg.rollouts_per_query).max(1);
    let mut best = state.clone();
    let mut best_report: Option<RankingReport> = None;
    let mut log = Vec::new();

    while state.epoch < cfg.epochs {
        // A fresh permutation each epoch keeps resumed runs identical.
        let mut order: Vec<Query> = train.to_vec();
        order.shuffle(&mut state.rng);
        let (mut reward, mut loss, mut ent) = (0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(queries_per_batch) {
            let mut batch = Vec::with_capacity(chunk.len() * cfg.rollouts_per_query);
            for q in chunk {
                for _ in 0..cfg.rollouts_per_query {
                    batch.push(sample_trajectory(&state.params, env, *q, &mut state.rng)?);
                }
            }
            let stats = reinforce_update(&mut state, env, &batch, cfg.baseline_decay)?;
            reward += stats.mean_reward;
            loss += stats.loss;
            ent += stats.mean_entropy;
            batches += 1;
        }
        state.epoch += 1;
        if cfg.entropy_decay_every > 0 && state.epoch % cfg.entropy_decay_every == 0 {
            state.entropy_weight *= cfg.entropy_decay;
        }

        let nb = batches as f64;
        let mut entry = EpochLog {
            epoch: state.epoch,
            reward: reward / nb,
            loss: loss / nb,
            entropy: ent / nb,
            baseline: state.baseline,
            dev_hits1: None,
            dev_mrr: None,
        };
        let due = cfg.eval_every > 0 && state.epoch % cfg.eval_every == 0;
        if let Some(dev) = dev.filter(|_| due || state.epoch == cfg.epochs) {
            let report = evaluate(
                &state.params,
                dev.env,
                dev.triples,
                cfg.beam_width,
                dev.mode,
                dev.known,
            )?;
            entry.dev_hits1 = Some(report.hits[0]);
            entry.dev_mrr = Some(report.mrr);
            if best_report.as_ref().is_none_or(|b| report.mrr > b.mrr) {
                best = state.clone();
                best_report = Some(report);
            }
        }
        on_epoch(&entry);
        log.push(entry);
    }
    if dev.is_none() || best_report.is_none() {
        best = state.clone();
    }
    Ok(TrainOutcome {
        last: state,
        best,
        best_report,
        log,
    })
}

/// JSON form of a [`TrainState`] plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format_version: u32,
    pub artifact: String,
    pub config: AgentConfig,
    pub vocab_sha: String,
    /// Free-form provenance (reward mode, shaper source, graph fingerprint …).
    pub meta: BTreeMap<String, String>,
    pub epoch: usize,
    pub baseline: f64,
    pub entropy_weight: f64,
    pub rng: RngState,
    /// `[num_entities, relation_slots, entity_dim, hidden_dim]`.
    pub shape: [usize; 4],
    pub params: Vec<Vec<f64>>,
    pub adam: AdamConfig,
    pub optimizer_step: u64,
    pub adam_m: Vec<Vec<f64>>,
    pub adam_v: Vec<Vec<f64>>,
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

impl AgentCheckpoint {
    pub fn capture<T: Scalar>(
        state: &TrainState<T>,
        config: &AgentConfig,
        vocab_sha: &str,
        meta: BTreeMap<String, String>,
    ) -> Self {
        let s = state.params.shape();
        Self {
            format_version: AGENT_FORMAT_VERSION,
            artifact: "agent".into(),
            config: config.clone(),
            vocab_sha: vocab_sha.to_owned(),
            meta,
            epoch: state.epoch,
            baseline: state.baseline,
            entropy_weight: state.entropy_weight,
            rng: RngState::capture(&state.rng),
            shape: [s.num_entities, s.relation_slots, s.entity_dim, s.hidden_dim],
            params: state.params.blocks().iter().map(|b| to_f64(b)).collect(),
            adam: state.optimizer.config,
            optimizer_step: state.optimizer.step,
            adam_m: state.optimizer.slots.iter().map(|s| to_f64(&s.m)).collect(),
            adam_v: state.optimizer.slots.iter().map(|s| to_f64(&s.v)).collect(),
        }
    }

    pub fn policy_shape(&self) -> PolicyShape {
        let [num_entities, relation_slots, entity_dim, hidden_dim] = self.shape;
        PolicyShape {
            num_entities,
            relation_slots,
            entity_dim,
            hidden_dim,
        }
    }

    fn check_version(&self) -> Result<()> {
        if self.format_version != AGENT_FORMAT_VERSION || self.artifact != "agent" {
            return Err(Error::Format(format!(
                "unsupported agent checkpoint ({} v{})",
                self.artifact, self.format_version
            )));
        }
        Ok(())
    }

    pub fn params<T: Scalar>(&self) -> Result<PolicyParams<T>> {
        self.check_version()?;
        let mut params = PolicyParams::zeros(self.policy_shape());
        if self.params.len() != 6 {
            return Err(Error::Format("agent checkpoint needs 6 parameter blocks".into()));
        }
        for ((name, dst), src) in PolicyParams::<T>::BLOCK_NAMES
            .iter()
            .zip(params.blocks_mut())
            .zip(&self.params)
        {
            if dst.len() != src.len() {
                return Err(Error::Format(format!(
                    "block {name} has {} values, shape needs {}",
                    src.len(),
                    dst.len()
                )));
            }
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = T::lit(s);
            }
        }
        if !params.is_finite() {
            return Err(Error::Numeric("checkpoint holds non-finite parameters".into()));
        }
        Ok(params)
    }

    pub fn restore<T: Scalar>(&self) -> Result<TrainState<T>> {
        let params = self.params::<T>()?;
        let mut optimizer = PolicyOptimizer::new(&params, self.adam.learning_rate);
        optimizer.config = self.adam;
        optimizer.step = self.optimizer_step;
        if self.adam_m.len() != optimizer.slots.len() || self.adam_v.len() != optimizer.slots.len() {
            return Err(Error::Format("optimizer slot count mismatch".into()));
        }
        for (i, slot) in optimizer.slots.iter_mut().enumerate() {
            if self.adam_m[i].len() != slot.m.len() || self.adam_v[i].len() != slot.v.len() {
                return Err(Error::Format(format!("optimizer slot {i} has the wrong length")));
            }
            *slot = AdamSlot {
                m: self.adam_m[i].iter().map(|&v| T::lit(v)).collect(),
                v: self.adam_v[i].iter().map(|&v| T::lit(v)).collect(),
            };
        }
        Ok(TrainState {
            params,
            optimizer,
            baseline: self.baseline,
            entropy_weight: self.entropy_weight,
            rng: self.rng.restore(),
            epoch: self.epoch,
        })
    }
}
