//! Triple storage: vocabularies, the TSV triple format, and the action graph.

mod graph;
mod parse;
mod vocab;

pub use graph::{Edge, Graph, GraphOptions, Query, Triple};
pub use parse::{parse_triples, parse_triples_into, write_triples, ParsedTriples, VocabMode};
pub use vocab::{Vocab, Vocabs};
