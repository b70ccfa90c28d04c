//! Rich/sparse graph pairs produced by masking entities and then edges.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::kg::{Graph, Triple};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub node_mask_ratio: f64,
    pub edge_mask_ratio: f64,
    pub seed: u64,
    /// Entities that are never masked.
    pub protect: BTreeSet<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            node_mask_ratio: 0.5,
            edge_mask_ratio: 0.5,
            seed: 42,
            protect: BTreeSet::new(),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("node_mask_ratio", self.node_mask_ratio),
            ("edge_mask_ratio", self.edge_mask_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Counts describing one split; serialized as `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitReport {
    pub entities_total: usize,
    pub entities_maskable: usize,
    pub entities_masked: usize,
    pub entities_kept: usize,
    pub facts_rich: usize,
    pub facts_removed_by_nodes: usize,
    pub facts_removed_by_edges: usize,
    pub facts_kept: usize,
    pub queries: usize,
    pub queries_answerable: usize,
    pub violations: usize,
}

impl SplitReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("entities_total", self.entities_total),
            ("entities_maskable", self.entities_maskable),
            ("entities_masked", self.entities_masked),
            ("entities_kept", self.entities_kept),
            ("facts_rich", self.facts_rich),
            ("facts_removed_by_nodes", self.facts_removed_by_nodes),
            ("facts_removed_by_edges", self.facts_removed_by_edges),
            ("facts_kept", self.facts_kept),
            ("queries", self.queries),
            ("queries_answerable", self.queries_answerable),
            ("violations", self.violations),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub rich: Graph,
    pub sparse: Graph,
    pub masked_entities: BTreeSet<usize>,
    /// Every rich fact absent from the sparse graph.
    pub masked_triples: BTreeSet<Triple>,
    pub report: SplitReport,
}

/// Masks `floor(node_ratio · maskable)` entities (dropping their incident
/// facts), then `floor(edge_ratio · survivors)` of the remaining facts.
///
/// Both draws are partial Fisher–Yates shuffles of id-sorted candidates on
/// the split stream of the seed, so the result is a pure function of the
/// input graph and `spec`. Vocabularies are untouched.
pub fn mask_split(rich: &Graph, spec: &SplitSpec) -> Result<SplitResult> {
    spec.validate()?;
    if rich.num_facts() == 0 {
        return Err(Error::Validation("cannot split an empty graph".into()));
    }
    let mut rng = stream_rng(spec.seed, Stream::Split);

    let mut maskable: Vec<usize> = (0..rich.num_entities())
        .filter(|e| !spec.protect.contains(e))
        .collect();
    let n_mask = (spec.node_mask_ratio * maskable.len() as f64).floor() as usize;
    let (chosen, _) = maskable.partial_shuffle(&mut rng, n_mask);
    let masked_entities: BTreeSet<usize> = chosen.iter().copied().collect();

    let (survivors, node_removed): (Vec<Triple>, Vec<Triple>) = rich
        .facts()
        .iter()
        .partition(|t| !masked_entities.contains(&t.head) && !masked_entities.contains(&t.tail));

    let n_edge = (spec.edge_mask_ratio * survivors.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..survivors.len()).collect();
    let (dropped, _) = order.partial_shuffle(&mut rng, n_edge);
    let dropped: BTreeSet<usize> = dropped.iter().copied().collect();
    let kept: Vec<Triple> = survivors
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, t)| *t)
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateSplit);
    }

    let sparse = Graph::build(
        rich.num_entities(),
        rich.num_relations(),
        kept.iter().copied(),
        rich.options(),
    )?;
    let mut masked_triples: BTreeSet<Triple> = node_removed.iter().copied().collect();
    masked_triples.extend(dropped.iter().map(|&i| survivors[i]));

    let report = SplitReport {
        entities_total: rich.num_entities(),
        entities_maskable: maskable.len(),
        entities_masked: masked_entities.len(),
        entities_kept: rich.num_entities() - masked_entities.len(),
        facts_rich: rich.num_facts(),
        facts_removed_by_nodes: node_removed.len(),
        facts_removed_by_edges: dropped.len(),
        facts_kept: sparse.num_facts(),
        queries: 0,
        queries_answerable: 0,
        violations: 0,
    };
    Ok(SplitResult {
        rich: rich.clone(),
        sparse,
        masked_entities,
        masked_triples,
        report,
    })
}

/// Re-checks the split invariants and counts how many of `queries` keep both
/// endpoints in the sparse graph's unmasked entity set.
pub fn verify_split(result: &SplitResult, queries: &[Triple]) -> Result<SplitReport> {
    let (rich, sparse) = (&result.rich, &result.sparse);
    if rich.num_entities() != sparse.num_entities() || rich.num_relations() != sparse.num_relations()
    {
        return Err(Error::Integrity(
            "rich and sparse graphs use different vocabulary sizes".into(),
        ));
    }
    for t in sparse.facts() {
        if !rich.contains(t) {
            return Err(Error::Integrity(format!("sparse fact {t:?} is not a rich fact")));
        }
        if result.masked_entities.contains(&t.head) || result.masked_entities.contains(&t.tail) {
            return Err(Error::Integrity(format!("sparse fact {t:?} touches a masked entity")));
        }
        if result.masked_triples.contains(t) {
            return Err(Error::Integrity(format!("sparse fact {t:?} is listed as masked")));
        }
    }
    if sparse.num_facts() + result.masked_triples.len() != rich.num_facts() {
        return Err(Error::Integrity(format!(
            "fact accounting mismatch: {} kept + {} masked != {} rich",
            sparse.num_facts(),
            result.masked_triples.len(),
            rich.num_facts()
        )));
    }
    let alive = |e: usize| !result.masked_entities.contains(&e);
    let mut report = result.report.clone();
    report.facts_kept = sparse.num_facts();
    report.queries = queries.len();
    report.queries_answerable = queries.iter().filter(|q| alive(q.head) && alive(q.tail)).count();
    report.violations = 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphOptions;

    fn square() -> Graph {
        Graph::build(
            4,
            2,
            [
                Triple::new(0, 0, 1),
                Triple::new(1, 0, 2),
                Triple::new(2, 1, 3),
                Triple::new(3, 1, 0),
                Triple::new(0, 1, 2),
            ],
            GraphOptions::default(),
        )
        .unwrap()
    }

    fn spec(node: f64, edge: f64, seed: u64) -> SplitSpec {
        SplitSpec {
            node_mask_ratio: node,
            edge_mask_ratio: edge,
            seed,
            protect: BTreeSet::new(),
        }
    }

    #[test]
    fn half_of_four_entities_masked() {
        // Some seeds mask both endpoints of every fact; find one that leaves facts.
        let res = (0..50)
            .find_map(|s| mask_split(&square(), &spec(0.5, 0.0, s)).ok())
            .unwrap();
        assert_eq!(res.masked_entities.len(), 2);
    }

    #[test]
    fn zero_ratios_are_identity() {
        let rich = square();
        let res = mask_split(&rich, &spec(0.0, 0.0, 9)).unwrap();
        assert_eq!(res.sparse.facts(), rich.facts());
        assert!(res.masked_entities.is_empty());
        let report = verify_split(&res, &[]).unwrap();
        assert_eq!(report.facts_kept, report.facts_rich);
    }

    #[test]
    fn deterministic_given_seed() {
        let rich = square();
        let a = mask_split(&rich, &spec(0.25, 0.5, 3)).unwrap();
        let b = mask_split(&rich, &spec(0.25, 0.5, 3)).unwrap();
        assert_eq!(a.sparse.facts(), b.sparse.facts());
        assert_eq!(a.masked_entities, b.masked_entities);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn invalid_ratio_is_rejected() {
        assert!(matches!(
            mask_split(&square(), &spec(1.5, 0.0, 0)),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            mask_split(&square(), &spec(0.0, -0.1, 0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn masking_everything_is_degenerate() {
        assert!(matches!(
            mask_split(&square(), &spec(1.0, 0.0, 0)),
            Err(Error::DegenerateSplit)
        ));
        assert!(matches!(
            mask_split(&square(), &spec(0.0, 1.0, 0)),
            Err(Error::DegenerateSplit)
        ));
    }

    #[test]
    fn protected_entities_survive() {
        let mut s = spec(1.0, 0.0, 1);
        s.protect = [0, 1].into_iter().collect();
        let res = mask_split(&square(), &s).unwrap();
        assert_eq!(res.masked_entities, [2, 3].into_iter().collect());
        assert_eq!(res.sparse.facts(), &[Triple::new(0, 0, 1)]);
    }

    #[test]
    fn verify_reports_zero_violations_on_valid_split() {
        let res = mask_split(&square(), &spec(0.0, 0.4, 5)).unwrap();
        let report = verify_split(&res, &[Triple::new(0, 0, 1)]).unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.queries_answerable, 1);
        assert_eq!(report.facts_removed_by_edges, 2);
    }

    #[test]
    fn verify_catches_extra_sparse_triple() {
        let mut res = mask_split(&square(), &spec(0.0, 0.4, 5)).unwrap();
        let mut facts = res.sparse.facts().to_vec();
        facts.push(Triple::new(1, 1, 1));
        res.sparse = Graph::build(4, 2, facts, GraphOptions::default()).unwrap();
        let err = verify_split(&res, &[]).unwrap_err();
        assert!(err.to_string().contains("Triple"), "{err}");
    }

    #[test]
    fn report_is_key_value_lines() {
        let res = mask_split(&square(), &spec(0.0, 0.0, 0)).unwrap();
        let kv = res.report.to_kv();
        assert!(kv.lines().all(|l| l.split_once('=').is_some()));
        assert!(kv.contains("facts_kept=5\n"));
    }
}
