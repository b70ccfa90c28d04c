use std::collections::HashSet;
use std::io::{BufRead, Write};

use super::{Triple, Vocabs};
use crate::error::{Error, Result};

/// Whether unseen names may be added to the vocabularies while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabMode {
    Extend,
    Fixed,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTriples {
    pub vocabs: Vocabs,
    pub triples: Vec<Triple>,
    pub duplicates: usize,
}

/// Parses `head TAB relation TAB tail` lines into freshly interned vocabularies.
pub fn parse_triples<R: BufRead>(reader: R) -> Result<ParsedTriples> {
    let mut vocabs = Vocabs::default();
    let (triples, duplicates) = parse_triples_into(reader, &mut vocabs, VocabMode::Extend)?;
    Ok(ParsedTriples {
        vocabs,
        triples,
        duplicates,
    })
}

/// Parses triples against existing vocabularies. Returns the triples in file
/// order (duplicates dropped) and the number of duplicate lines.
pub fn parse_triples_into<R: BufRead>(
    reader: R,
    vocabs: &mut Vocabs,
    mode: VocabMode,
) -> Result<(Vec<Triple>, usize)> {
    let mut seen = HashSet::new();
    let mut triples = Vec::new();
    let mut duplicates = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("field {} is empty", pos + 1),
            });
        }
        let triple = match mode {
            VocabMode::Extend => Triple::new(
                vocabs.entities.intern(fields[0]),
                vocabs.relations.intern(fields[1]),
                vocabs.entities.intern(fields[2]),
            ),
            VocabMode::Fixed => {
                let lookup = |id: Option<usize>, kind: &str, name: &str| {
                    id.ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("unknown {kind} '{name}'"),
                    })
                };
                Triple::new(
                    lookup(vocabs.entities.get(fields[0]), "entity", fields[0])?,
                    lookup(vocabs.relations.get(fields[1]), "relation", fields[1])?,
                    lookup(vocabs.entities.get(fields[2]), "entity", fields[2])?,
                )
            }
        };
        if seen.insert(triple) {
            triples.push(triple);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("dropped {duplicates} duplicate triple line(s)");
    }
    Ok((triples, duplicates))
}

pub fn write_triples<W: Write>(mut writer: W, vocabs: &Vocabs, triples: &[Triple]) -> Result<()> {
    for t in triples {
        writeln!(
            writer,
            "{}\t{}\t{}",
            vocabs.entities.name(t.head),
            vocabs.relations.name(t.relation),
            vocabs.entities.name(t.tail)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines_three_entities() {
        let p = parse_triples("A\tr1\tB\nB\tr2\tC\n".as_bytes()).unwrap();
        assert_eq!(p.vocabs.entities.len(), 3);
        assert_eq!(p.vocabs.relations.len(), 2);
        assert_eq!(p.triples.len(), 2);
        assert_eq!(p.triples[0], Triple::new(0, 0, 1));
        assert_eq!(p.triples[1], Triple::new(1, 1, 2));
    }

    #[test]
    fn empty_input_is_an_empty_graph() {
        let p = parse_triples("".as_bytes()).unwrap();
        assert!(p.vocabs.entities.is_empty());
        assert!(p.vocabs.relations.is_empty());
        assert!(p.triples.is_empty());
    }

    #[test]
    fn duplicate_lines_are_counted_once() {
        let p = parse_triples("A\tr1\tB\nA\tr1\tB\n".as_bytes()).unwrap();
        assert_eq!(p.triples.len(), 1);
        assert_eq!(p.duplicates, 1);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let err = parse_triples("A\tr1\tB\nA\tr1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_triples("A\t\tB\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn fixed_mode_rejects_unknown_names() {
        let mut p = parse_triples("A\tr1\tB\n".as_bytes()).unwrap();
        let err = parse_triples_into("A\tr1\tZ\n".as_bytes(), &mut p.vocabs, VocabMode::Fixed);
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
        let (ts, _) =
            parse_triples_into("B\tr1\tA\n".as_bytes(), &mut p.vocabs, VocabMode::Fixed).unwrap();
        assert_eq!(ts, vec![Triple::new(1, 0, 0)]);
    }

    #[test]
    fn write_round_trips_fact_set() {
        let text = "A\tr1\tB\nB\tr2\tC\nC\tr1\tA\n";
        let p = parse_triples(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_triples(&mut out, &p.vocabs, &p.triples).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
