//! Link-prediction ranking metrics: Hits@k and mean reciprocal rank.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::WalkEnv;
use crate::error::{Error, Result};
use crate::kg::{Query, Triple};
use crate::policy::{beam_decode, PolicyParams};
use crate::scalar::Scalar;

pub const HITS_AT: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    Raw,
    Filtered,
}

impl fmt::Display for RankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMode::Raw => "raw",
            RankMode::Filtered => "filtered",
        })
    }
}

impl FromStr for RankMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(RankMode::Raw),
            "filtered" => Ok(RankMode::Filtered),
            other => Err(Error::Validation(format!(
                "unknown ranking mode '{other}' (expected raw or filtered)"
            ))),
        }
    }
}

/// Every known tail per `(head, relation)`, used to filter rankings.
#[derive(Debug, Clone, Default)]
pub struct KnownAnswers {
    map: HashMap<(usize, usize), HashSet<usize>>,
}

impl KnownAnswers {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut map: HashMap<(usize, usize), HashSet<usize>> = HashMap::new();
        for t in triples {
            map.entry((t.head, t.relation)).or_default().insert(t.tail);
        }
        Self { map }
    }

    pub fn contains(&self, head: usize, relation: usize, tail: usize) -> bool {
        self.map
            .get(&(head, relation))
            .is_some_and(|s| s.contains(&tail))
    }
}

/// 1-based rank of `answer` in `ranked` (sorted best first).
///
/// In filtered mode, other known answers of the same `(head, relation)` that
/// precede the target are skipped. Absent answers rank `num_entities + 1`.
pub fn rank_of_answer(
    ranked: &[(usize, f64)],
    query: &Query,
    answer: usize,
    mode: RankMode,
    known: &KnownAnswers,
    num_entities: usize,
) -> Result<usize> {
    let mut seen = HashSet::with_capacity(ranked.len());
    if let Some(dup) = ranked.iter().find(|(e, _)| !seen.insert(*e)) {
        return Err(Error::Evaluation(format!(
            "entity {} appears twice in the ranking",
            dup.0
        )));
    }
    let mut rank = 1;
    for &(entity, _) in ranked {
        if entity == answer {
            return Ok(rank);
        }
        let skip = mode == RankMode::Filtered && known.contains(query.source, query.relation, entity);
        if !skip {
            rank += 1;
        }
    }
    Ok(num_entities + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query: Query,
    pub rank: usize,
    /// False when the answer never appeared in the ranking.
    pub found: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mode: RankMode,
    pub count: usize,
    pub hits: [f64; 4],
    pub mrr: f64,
    pub per_query: Vec<QueryRank>,
}

impl RankingReport {
    pub fn hits_at(&self, k: usize) -> Option<f64> {
        HITS_AT.iter().position(|&h| h == k).map(|i| self.hits[i])
    }

    /// `hits1=… hits3=… hits5=… hits10=… mrr=… n=… mode=…`, one per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, h) in HITS_AT.iter().zip(self.hits) {
            let _ = writeln!(s, "hits{k}={h:.6}");
        }
        let _ = writeln!(s, "mrr={:.6}", self.mrr);
        let _ = writeln!(s, "n={}", self.count);
        let _ = writeln!(s, "mode={}", self.mode);
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
            "mode", "Hits@1", "Hits@3", "Hits@5", "Hits@10", "MRR", "n"
        );
        let _ = writeln!(
            s,
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6}",
            self.mode.to_string(),
            self.hits[0],
            self.hits[1],
            self.hits[2],
            self.hits[3],
            self.mrr,
            self.count
        );
        s
    }
}

/// Hits@{1,3,5,10} and MRR over positive ranks.
pub fn aggregate(ranks: &[QueryRank], mode: RankMode) -> Result<RankingReport> {
    if ranks.is_empty() {
        return Err(Error::Evaluation("no ranks to aggregate".into()));
    }
    if ranks.iter().any(|r| r.rank == 0) {
        return Err(Error::Evaluation("ranks are 1-based".into()));
    }
    let n = ranks.len() as f64;
    let mut hits = [0.0; 4];
    for (slot, &k) in hits.iter_mut().zip(&HITS_AT) {
        *slot = ranks.iter().filter(|r| r.rank <= k).count() as f64 / n;
    }
    let mrr = ranks.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n;
    Ok(RankingReport {
        mode,
        count: ranks.len(),
        hits,
        mrr,
        per_query: ranks.to_vec(),
    })
}

/// Convenience wrapper over [`aggregate`] for bare rank values.
pub fn aggregate_ranks(ranks: &[usize], mode: RankMode) -> Result<RankingReport> {
    let wrapped: Vec<QueryRank> = ranks
        .iter()
        .map(|&rank| QueryRank {
            query: Query::new(0, 0),
            rank,
            found: true,
        })
        .collect();
    aggregate(&wrapped, mode)
}

/// Ranks the tail of each test triple with an arbitrary ranker.
pub fn evaluate_with<F>(
    test: &[Triple],
    mode: RankMode,
    known: &KnownAnswers,
    num_entities: usize,
    mut ranker: F,
) -> Result<RankingReport>
where
    F: FnMut(Query) -> Result<Vec<(usize, f64)>>,
{
    let mut ranks = Vec::with_capacity(test.len());
    for t in test {
        let query = Query::new(t.head, t.relation);
        let ranked = ranker(query)?;
        let rank = rank_of_answer(&ranked, &query, t.tail, mode, known, num_entities)?;
        ranks.push(QueryRank {
            query: Query::from_triple(t),
            rank,
            found: rank <= num_entities,
        });
    }
    aggregate(&ranks, mode)
}

/// One query per test triple, answered by beam search with the policy.
pub fn evaluate<T: Scalar>(
    params: &PolicyParams<T>,
    env: &WalkEnv,
    test: &[Triple],
    beam_width: usize,
    mode: RankMode,
    known: &KnownAnswers,
) -> Result<RankingReport> {
    let n = env.graph().num_entities();
    evaluate_with(test, mode, known, n, |q| beam_decode(params, env, q, beam_width))
}

/// Sorts `scores[e]` into a `(entity, score)` ranking, best first, ties by id.
pub fn rank_scores(scores: &[f64]) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    ranked
}
