use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ScoreProvider, ShaperModel};
use crate::error::{Error, Result};
use crate::kg::Vocabs;
use crate::scalar::Scalar;

/// What a [`ScoreTable`] does when asked about a `(head, relation)` it lacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingScore {
    #[default]
    Error,
    Zero,
}

impl FromStr for MissingScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(MissingScore::Error),
            "zero" => Ok(MissingScore::Zero),
            other => Err(Error::Validation(format!(
                "unknown missing-score policy '{other}' (expected error or zero)"
            ))),
        }
    }
}

/// Materialized `(head, relation) → [score; |E|]` map.
///
/// File layout (UTF-8, LF):
///
/// ```text
/// #provenance=distmult
/// #entities=135
/// #relations=46
/// #vocab_sha=<sha256 hex>
/// head<TAB>relation<TAB>tail<TAB>0.123456
/// ```
///
/// Every listed `(head, relation)` must have exactly one row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub provenance: String,
    pub num_entities: usize,
    pub num_relations: usize,
    pub vocab_sha: String,
    pub entries: BTreeMap<(usize, usize), Vec<f64>>,
    pub on_missing: MissingScore,
}

impl ScoreTable {
    pub fn new(provenance: impl Into<String>, vocabs: &Vocabs) -> Self {
        Self {
            provenance: provenance.into(),
            num_entities: vocabs.entities.len(),
            num_relations: vocabs.relations.len(),
            vocab_sha: vocabs.checksum(),
            entries: BTreeMap::new(),
            on_missing: MissingScore::Error,
        }
    }

    pub fn insert(&mut self, head: usize, relation: usize, scores: Vec<f64>) -> Result<()> {
        if scores.len() != self.num_entities {
            return Err(Error::Format(format!(
                "score vector of length {} for {} entities",
                scores.len(),
                self.num_entities
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Format(format!("score {bad} outside [0, 1]")));
        }
        self.entries.insert((head, relation), scores);
        Ok(())
    }

    /// Scores every tail of each pair in `pairs` with `model`.
    pub fn from_model<T: Scalar>(
        model: &ShaperModel<T>,
        vocabs: &Vocabs,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if model.num_entities() != vocabs.entities.len()
            || model.num_relations() != vocabs.relations.len()
        {
            return Err(Error::Incompatible(format!(
                "model is {}x{} but vocabularies are {}x{}",
                model.num_entities(),
                model.num_relations(),
                vocabs.entities.len(),
                vocabs.relations.len()
            )));
        }
        let mut table = Self::new(model.kind.to_string(), vocabs);
        for (h, r) in pairs {
            let scores = model.score_tails(h, r).into_iter().map(Scalar::as_f64).collect();
            table.insert(h, r, scores)?;
        }
        Ok(table)
    }

    pub fn get(&self, head: usize, relation: usize) -> Option<&[f64]> {
        self.entries.get(&(head, relation)).map(Vec::as_slice)
    }

    pub fn with_missing(mut self, on_missing: MissingScore) -> Self {
        self.on_missing = on_missing;
        self
    }

    pub fn write<W: Write>(&self, mut w: W, vocabs: &Vocabs) -> Result<()> {
        writeln!(w, "#provenance={}", self.provenance)?;
        writeln!(w, "#entities={}", self.num_entities)?;
        writeln!(w, "#relations={}", self.num_relations)?;
        writeln!(w, "#vocab_sha={}", self.vocab_sha)?;
        for (&(h, r), scores) in &self.entries {
            let head = vocabs.entities.name(h);
            let rel = vocabs.relations.name(r);
            for (t, s) in scores.iter().enumerate() {
                writeln!(w, "{head}\t{rel}\t{}\t{s:.6}", vocabs.entities.name(t))?;
            }
        }
        Ok(())
    }

    /// Parses a table and checks it against `vocabs`.
    pub fn read<R: BufRead>(reader: R, vocabs: &Vocabs) -> Result<Self> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut partial: BTreeMap<(usize, usize), Vec<Option<f64>>> = BTreeMap::new();
        let n = vocabs.entities.len();
        let mut in_header = true;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let fmt_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                if !in_header {
                    return Err(fmt_err("header line after score rows".into()));
                }
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| fmt_err(format!("malformed header '{line}'")))?;
                header.insert(k.to_owned(), v.to_owned());
                continue;
            }
            if in_header {
                in_header = false;
                check_header(&header, vocabs)?;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(fmt_err(format!("expected 4 fields, found {}", fields.len())));
            }
            let ent = |name: &str| {
                vocabs
                    .entities
                    .get(name)
                    .ok_or_else(|| fmt_err(format!("unknown entity '{name}'")))
            };
            let h = ent(fields[0])?;
            let r = vocabs
                .relations
                .get(fields[1])
                .ok_or_else(|| fmt_err(format!("unknown relation '{}'", fields[1])))?;
            let t = ent(fields[2])?;
            let s: f64 = fields[3]
                .parse()
                .map_err(|_| fmt_err(format!("bad score '{}'", fields[3])))?;
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Format(format!(
                    "line {line_no}: score {s} outside [0, 1]"
                )));
            }
            let slot = &mut partial.entry((h, r)).or_insert_with(|| vec![None; n])[t];
            if slot.is_some() {
                return Err(fmt_err(format!("duplicate row for ({}, {}, {})", fields[0], fields[1], fields[2])));
            }
            *slot = Some(s);
        }
        if in_header {
            check_header(&header, vocabs)?;
        }
        let mut table = Self {
            provenance: header.get("provenance").cloned().unwrap_or_default(),
            num_entities: n,
            num_relations: vocabs.relations.len(),
            vocab_sha: vocabs.checksum(),
            entries: BTreeMap::new(),
            on_missing: MissingScore::Error,
        };
        for ((h, r), scores) in partial {
            let missing = scores.iter().filter(|s| s.is_none()).count();
            if missing > 0 {
                return Err(Error::Format(format!(
                    "({}, {}) lacks {missing} of {n} tail scores",
                    vocabs.entities.name(h),
                    vocabs.relations.name(r)
                )));
            }
            table.entries.insert((h, r), scores.into_iter().flatten().collect());
        }
        Ok(table)
    }
}

fn check_header(header: &BTreeMap<String, String>, vocabs: &Vocabs) -> Result<()> {
    for key in ["provenance", "entities", "relations", "vocab_sha"] {
        if !header.contains_key(key) {
            return Err(Error::Format(format!("missing header #{key}=")));
        }
    }
    let count = |key: &str| -> Result<usize> {
        header[key]
            .parse()
            .map_err(|_| Error::Format(format!("#{key} is not an integer")))
    };
    let (ne, nr) = (count("entities")?, count("relations")?);
    if ne != vocabs.entities.len() || nr != vocabs.relations.len() {
        return Err(Error::Incompatible(format!(
            "table is for {ne} entities / {nr} relations, vocabularies have {} / {}",
            vocabs.entities.len(),
            vocabs.relations.len()
        )));
    }
    let expected = vocabs.checksum();
    if header["vocab_sha"] != expected {
        return Err(Error::Incompatible(format!(
            "vocab_sha {} does not match {expected}",
            header["vocab_sha"]
        )));
    }
    Ok(())
}

impl ScoreProvider for ScoreTable {
    fn score(&self, head: usize, relation: usize, tail: usize) -> Result<f64> {
        match self.get(head, relation) {
            Some(scores) => scores
                .get(tail)
                .copied()
                .ok_or_else(|| Error::Query(format!("tail id {tail} out of range"))),
            None => match self.on_missing {
                MissingScore::Zero => Ok(0.0),
                MissingScore::Error => Err(Error::MissingScore(format!(
                    "(head {head}, relation {relation})"
                ))),
            },
        }
    }

    fn provenance(&self) -> String {
        self.provenance.clone()
    }
}
