use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One directed fact `(head, relation, tail)` over interned ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// An outgoing edge, i.e. one action available to the walker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub relation: usize,
    pub target: usize,
}

/// `(e_s, r_q, ?)` with the expected answer when the query comes from a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub source: usize,
    pub relation: usize,
    pub answer: Option<usize>,
}

impl Query {
    pub fn new(source: usize, relation: usize) -> Self {
        Self {
            source,
            relation,
            answer: None,
        }
    }

    pub fn from_triple(t: &Triple) -> Self {
        Self {
            source: t.head,
            relation: t.relation,
            answer: Some(t.tail),
        }
    }

    pub fn without_answer(self) -> Self {
        Self {
            answer: None,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub self_loops: bool,
    pub inverses: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            self_loops: true,
            inverses: true,
        }
    }
}

/// Immutable fact store with per-entity action lists.
///
/// Relation ids `0..R` are the dataset relations. The remaining slots are
/// reserved: `R + r` is the inverse of `r`, `2R` is the self-loop and `2R + 1`
/// the "no previous action" sentinel fed to the policy at the first step.
/// Reserved edges are walkable but never facts.
#[derive(Debug, Clone)]
pub struct Graph {
    num_entities: usize,
    num_relations: usize,
    options: GraphOptions,
    facts: Vec<Triple>,
    fact_set: HashSet<Triple>,
    answers: HashMap<(usize, usize), Vec<usize>>,
    adjacency: Vec<Vec<Edge>>,
}

impl Graph {
    pub fn build(
        num_entities: usize,
        num_relations: usize,
        triples: impl IntoIterator<Item = Triple>,
        options: GraphOptions,
    ) -> Result<Self> {
        let mut fact_set = HashSet::new();
        for t in triples {
            if t.head >= num_entities || t.tail >= num_entities {
                return Err(Error::Construction(format!(
                    "entity id out of range in {t:?} (|E| = {num_entities})"
                )));
            }
            if t.relation >= num_relations {
                return Err(Error::Construction(format!(
                    "relation id out of range in {t:?} (|R| = {num_relations})"
                )));
            }
            fact_set.insert(t);
        }
        let mut facts: Vec<Triple> = fact_set.iter().copied().collect();
        facts.sort_unstable();

        let mut adjacency = vec![Vec::new(); num_entities];
        let mut answers: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for t in &facts {
            adjacency[t.head].push(Edge {
                relation: t.relation,
                target: t.tail,
            });
            if options.inverses {
                adjacency[t.tail].push(Edge {
                    relation: num_relations + t.relation,
                    target: t.head,
                });
            }
            answers.entry((t.head, t.relation)).or_default().push(t.tail);
        }
        let self_loop = 2 * num_relations;
        for (e, edges) in adjacency.iter_mut().enumerate() {
            if options.self_loops {
                edges.push(Edge {
                    relation: self_loop,
                    target: e,
                });
            }
            edges.sort_unstable();
            edges.dedup();
        }
        Ok(Self {
            num_entities,
            num_relations,
            options,
            facts,
            fact_set,
            answers,
            adjacency,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    /// Number of dataset relations, excluding reserved slots.
    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Size of the full relation id space including reserved slots.
    pub fn relation_slots(&self) -> usize {
        2 * self.num_relations + 2
    }

    pub fn inverse_of(&self, relation: usize) -> usize {
        debug_assert!(relation < self.num_relations);
        self.num_relations + relation
    }

    pub fn self_loop(&self) -> usize {
        2 * self.num_relations
    }

    pub fn no_op(&self) -> usize {
        2 * self.num_relations + 1
    }

    pub fn is_reserved(&self, relation: usize) -> bool {
        relation >= self.num_relations
    }

    pub fn options(&self) -> GraphOptions {
        self.options
    }

    /// Original facts, sorted.
    pub fn facts(&self) -> &[Triple] {
        &self.facts
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    /// True iff `triple` is an original (non-augmented) fact.
    pub fn contains(&self, triple: &Triple) -> bool {
        self.fact_set.contains(triple)
    }

    pub fn actions_of(&self, entity: usize) -> &[Edge] {
        &self.adjacency[entity]
    }

    /// Known tails of `(head, relation)`, ascending.
    pub fn answers(&self, head: usize, relation: usize) -> &[usize] {
        self.answers
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Distinct `(head, relation)` pairs with at least one fact, ascending.
    pub fn query_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self.answers.keys().copied().collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn validate_query(&self, query: &Query) -> Result<()> {
        if query.source >= self.num_entities {
            return Err(Error::Query(format!("unknown source entity id {}", query.source)));
        }
        if query.relation >= self.num_relations {
            return Err(Error::Query(format!("unknown query relation id {}", query.relation)));
        }
        if let Some(a) = query.answer {
            if a >= self.num_entities {
                return Err(Error::Query(format!("unknown answer entity id {a}")));
            }
        }
        Ok(())
    }

    /// SHA-256 over the vocabulary sizes and the sorted fact list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.num_entities as u64).to_le_bytes());
        hasher.update((self.num_relations as u64).to_le_bytes());
        for t in &self.facts {
            hasher.update((t.head as u64).to_le_bytes());
            hasher.update((t.relation as u64).to_le_bytes());
            hasher.update((t.tail as u64).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const B: usize = 1;
    const D: usize = 2;

    fn opts(self_loops: bool, inverses: bool) -> GraphOptions {
        GraphOptions {
            self_loops,
            inverses,
        }
    }

    #[test]
    fn self_loops_are_appended_after_sorted_edges() {
        let g = Graph::build(2, 1, [Triple::new(A, 0, B)], opts(true, false)).unwrap();
        let sl = g.self_loop();
        assert_eq!(
            g.actions_of(A),
            &[
                Edge {
                    relation: 0,
                    target: B
                },
                Edge {
                    relation: sl,
                    target: A
                }
            ]
        );
        assert_eq!(
            g.actions_of(B),
            &[Edge {
                relation: sl,
                target: B
            }]
        );
    }

    #[test]
    fn inverse_edges_point_back() {
        let g = Graph::build(2, 1, [Triple::new(A, 0, B)], opts(false, true)).unwrap();
        assert!(g.actions_of(B).contains(&Edge {
            relation: g.inverse_of(0),
            target: A
        }));
    }

    #[test]
    fn no_augmentation_leaves_sinks_empty() {
        let g = Graph::build(2, 1, [Triple::new(A, 0, B)], opts(false, false)).unwrap();
        assert!(g.actions_of(B).is_empty());
    }

    #[test]
    fn membership_is_directional_and_ignores_augmentation() {
        let g = Graph::build(2, 1, [Triple::new(A, 0, B)], GraphOptions::default()).unwrap();
        assert!(g.contains(&Triple::new(A, 0, B)));
        assert!(!g.contains(&Triple::new(B, 0, A)));
        assert!(!g.contains(&Triple::new(A, g.self_loop(), A)));
        assert!(!g.contains(&Triple::new(B, g.inverse_of(0), A)));
    }

    #[test]
    fn action_counts_and_isolated_entities() {
        let g = Graph::build(
            4,
            2,
            [Triple::new(A, 0, B), Triple::new(A, 1, D)],
            opts(true, false),
        )
        .unwrap();
        assert_eq!(g.actions_of(A).len(), 3);
        assert_eq!(
            g.actions_of(3),
            &[Edge {
                relation: g.self_loop(),
                target: 3
            }]
        );
        assert_eq!(g.actions_of(A), g.actions_of(A));
    }

    #[test]
    fn out_of_range_ids_fail_construction() {
        assert!(matches!(
            Graph::build(2, 1, [Triple::new(A, 0, 5)], GraphOptions::default()),
            Err(Error::Construction(_))
        ));
        assert!(matches!(
            Graph::build(2, 1, [Triple::new(A, 3, B)], GraphOptions::default()),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn answers_and_pairs() {
        let g = Graph::build(
            3,
            1,
            [Triple::new(A, 0, D), Triple::new(A, 0, B)],
            GraphOptions::default(),
        )
        .unwrap();
        assert_eq!(g.answers(A, 0), &[B, D]);
        assert!(g.answers(B, 0).is_empty());
        assert_eq!(g.query_pairs(), vec![(A, 0)]);
    }
}
