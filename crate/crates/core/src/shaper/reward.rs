use super::ShaperModel;
use crate::error::Result;
use crate::kg::{Graph, Triple};
use crate::scalar::Scalar;

/// Anything that can score a triple in `[0, 1]`.
pub trait ScoreProvider: Send + Sync {
    fn score(&self, head: usize, relation: usize, tail: usize) -> Result<f64>;

    fn provenance(&self) -> String;
}

impl<T: Scalar> ScoreProvider for ShaperModel<T> {
    fn score(&self, head: usize, relation: usize, tail: usize) -> Result<f64> {
        self.score_triple(head, relation, tail).map(Scalar::as_f64)
    }

    fn provenance(&self) -> String {
        self.kind.to_string()
    }
}

/// `R_b + (1 − R_b)·f`: the binary reward where it is 1, the shaper score elsewhere.
#[inline]
pub fn shape(binary: f64, score: f64) -> f64 {
    binary + (1.0 - binary) * score
}

/// Shaped terminal reward for ending a walk for `(e_s, r_q)` at `e_t`.
/// The provider is not consulted for observed facts.
pub fn shaped_reward(
    provider: &dyn ScoreProvider,
    graph: &Graph,
    source: usize,
    relation: usize,
    end: usize,
) -> Result<f64> {
    if graph.contains(&Triple::new(source, relation, end)) {
        return Ok(1.0);
    }
    Ok(shape(0.0, provider.score(source, relation, end)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::kg::GraphOptions;

    struct Constant(f64);

    impl ScoreProvider for Constant {
        fn score(&self, _: usize, _: usize, _: usize) -> Result<f64> {
            Ok(self.0)
        }
        fn provenance(&self) -> String {
            "constant".into()
        }
    }

    struct Failing;

    impl ScoreProvider for Failing {
        fn score(&self, _: usize, _: usize, _: usize) -> Result<f64> {
            Err(Error::MissingScore("always".into()))
        }
        fn provenance(&self) -> String {
            "failing".into()
        }
    }

    fn graph() -> Graph {
        Graph::build(3, 1, [Triple::new(0, 0, 1)], GraphOptions::default()).unwrap()
    }

    #[test]
    fn facts_earn_one_regardless_of_score() {
        assert_eq!(shaped_reward(&Constant(0.01), &graph(), 0, 0, 1).unwrap(), 1.0);
        assert_eq!(shaped_reward(&Failing, &graph(), 0, 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn non_facts_earn_the_score() {
        assert_eq!(shaped_reward(&Constant(0.3), &graph(), 0, 0, 2).unwrap(), 0.3);
        assert_eq!(shaped_reward(&Constant(0.0), &graph(), 0, 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn provider_errors_propagate_for_non_facts() {
        assert!(shaped_reward(&Failing, &graph(), 0, 0, 2).is_err());
    }
}
