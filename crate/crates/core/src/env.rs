//! Finite-horizon walk environment over a knowledge graph.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Edge, Graph, Query, Triple, Vocabs};
use crate::shaper::{shape, ScoreProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Binary,
    Shaped,
}

impl std::str::FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(RewardMode::Binary),
            "shaped" => Ok(RewardMode::Shaped),
            other => Err(Error::Validation(format!(
                "unknown reward mode '{other}' (expected binary or shaped)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: usize,
    pub reward_mode: RewardMode,
    /// Hide the `(r_q, answer)` edge at the source while walking a query
    /// that carries its answer.
    pub mask_query_edge: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon: 3,
            reward_mode: RewardMode::Binary,
            mask_query_edge: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeState {
    pub step: usize,
    pub current: usize,
    pub query: Query,
    pub history: Vec<Edge>,
}

impl EpisodeState {
    /// Relation of the previous action, or `None` at the first step.
    pub fn previous_relation(&self) -> Option<usize> {
        self.history.last().map(|e| e.relation)
    }
}

/// Walks happen on `graph`; terminal rewards are judged against
/// `reward_graph` (by default the same graph) plus the query's own answer.
#[derive(Clone, Copy)]
pub struct WalkEnv<'a> {
    graph: &'a Graph,
    reward_graph: &'a Graph,
    shaper: Option<&'a dyn ScoreProvider>,
    config: EnvConfig,
}

impl<'a> WalkEnv<'a> {
    pub fn new(
        graph: &'a Graph,
        config: EnvConfig,
        shaper: Option<&'a dyn ScoreProvider>,
    ) -> Result<Self> {
        if config.horizon == 0 {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        if config.reward_mode == RewardMode::Shaped && shaper.is_none() {
            return Err(Error::Validation("shaped rewards need a shaper".into()));
        }
        if !graph.options().self_loops {
            return Err(Error::Validation(
                "the walk graph needs self-loops so every state has an action".into(),
            ));
        }
        Ok(Self {
            graph,
            reward_graph: graph,
            shaper,
            config,
        })
    }

    pub fn with_reward_graph(mut self, reward_graph: &'a Graph) -> Self {
        self.reward_graph = reward_graph;
        self
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn reset(&self, query: Query) -> Result<EpisodeState> {
        self.graph.validate_query(&query)?;
        Ok(EpisodeState {
            step: 0,
            current: query.source,
            query,
            history: Vec::new(),
        })
    }

    /// Actions available in `state`, in graph order.
    pub fn actions(&self, state: &EpisodeState) -> Cow<'a, [Edge]> {
        let all = self.graph.actions_of(state.current);
        let q = &state.query;
        match q.answer {
            Some(answer) if self.config.mask_query_edge && state.current == q.source => {
                let hidden = Edge {
                    relation: q.relation,
                    target: answer,
                };
                if all.contains(&hidden) {
                    Cow::Owned(all.iter().copied().filter(|e| *e != hidden).collect())
                } else {
                    Cow::Borrowed(all)
                }
            }
            _ => Cow::Borrowed(all),
        }
    }

    /// Deterministic transition along the chosen edge.
    pub fn step(&self, state: &EpisodeState, action_index: usize) -> Result<EpisodeState> {
        if state.step >= self.config.horizon {
            return Err(Error::Horizon(format!(
                "step called at t = {} with horizon {}",
                state.step, self.config.horizon
            )));
        }
        let actions = self.actions(state);
        let edge = *actions.get(action_index).ok_or_else(|| {
            Error::Action(format!(
                "action {action_index} out of range ({} available)",
                actions.len()
            ))
        })?;
        let mut history = state.history.clone();
        history.push(edge);
        Ok(EpisodeState {
            step: state.step + 1,
            current: edge.target,
            query: state.query,
            history,
        })
    }

    pub fn is_fact(&self, query: &Query, end: usize) -> bool {
        query.answer == Some(end)
            || self
                .reward_graph
                .contains(&Triple::new(query.source, query.relation, end))
    }

    pub fn terminal_reward(&self, state: &EpisodeState) -> Result<f64> {
        if state.step != self.config.horizon {
            return Err(Error::Horizon(format!(
                "terminal reward requested at t = {} before horizon {}",
                state.step, self.config.horizon
            )));
        }
        let q = &state.query;
        if self.is_fact(q, state.current) {
            return Ok(1.0);
        }
        match self.config.reward_mode {
            RewardMode::Binary => Ok(0.0),
            RewardMode::Shaped => {
                let shaper = self.shaper.expect("checked at construction");
                Ok(shape(0.0, shaper.score(q.source, q.relation, state.current)?))
            }
        }
    }

    /// Debug record of a finished episode, one JSON object per line.
    pub fn record(&self, state: &EpisodeState, reward: f64, vocabs: &Vocabs) -> EpisodeRecord {
        let q = &state.query;
        EpisodeRecord {
            source: q.source,
            source_name: vocabs.entities.name(q.source).to_owned(),
            relation: q.relation,
            relation_name: vocabs.relations.name(q.relation).to_owned(),
            answer: q.answer,
            path: state
                .history
                .iter()
                .map(|e| {
                    (
                        vocabs.relation_label(e.relation),
                        vocabs.entities.name(e.target).to_owned(),
                    )
                })
                .collect(),
            end: state.current,
            end_name: vocabs.entities.name(state.current).to_owned(),
            reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub source: usize,
    pub source_name: String,
    pub relation: usize,
    pub relation_name: String,
    pub answer: Option<usize>,
    pub path: Vec<(String, String)>,
    pub end: usize,
    pub end_name: String,
    pub reward: f64,
}
