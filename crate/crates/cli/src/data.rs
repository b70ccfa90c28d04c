use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use kgwalk_core::kg::{
    parse_triples_into, Graph, GraphOptions, Triple, Vocab, VocabMode, Vocabs,
};

use crate::error::{CliError, CliResult};

pub const ENTITIES_FILE: &str = "entities.txt";
pub const RELATIONS_FILE: &str = "relations.txt";

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn read_vocab(path: &Path) -> CliResult<Vocab> {
    Vocab::read(open(path)?).map_err(|e| CliError::at(path, e))
}

/// Resolves the vocabularies for a command.
///
/// Explicit `--entities/--relations` win; otherwise `entities.txt` and
/// `relations.txt` next to `graph` are used; otherwise names are interned in
/// first-appearance order over `graph` followed by `extra`.
pub fn resolve_vocabs(
    graph: &Path,
    entities: Option<&Path>,
    relations: Option<&Path>,
    extra: &[PathBuf],
) -> CliResult<(Vocabs, Vec<PathBuf>)> {
    let dir = graph.parent().unwrap_or(Path::new("."));
    let (ents, rels) = match (entities, relations) {
        (Some(e), Some(r)) => (e.to_path_buf(), r.to_path_buf()),
        (None, None) => (dir.join(ENTITIES_FILE), dir.join(RELATIONS_FILE)),
        _ => {
            return Err(CliError::invalid(
                "--entities and --relations must be given together",
            ))
        }
    };
    if ents.is_file() && rels.is_file() {
        let vocabs = Vocabs::new(read_vocab(&ents)?, read_vocab(&rels)?);
        return Ok((vocabs, vec![ents, rels]));
    }
    if entities.is_some() {
        return Err(CliError::io(&ents, "vocabulary file not found"));
    }
    let mut vocabs = Vocabs::default();
    for p in std::iter::once(graph).chain(extra.iter().map(PathBuf::as_path)) {
        parse_triples_into(open(p)?, &mut vocabs, VocabMode::Extend)
            .map_err(|e| CliError::at(p, e))?;
    }
    Ok((vocabs, Vec::new()))
}

pub fn read_triples(path: &Path, vocabs: &mut Vocabs) -> CliResult<Vec<Triple>> {
    let (triples, _) = parse_triples_into(open(path)?, vocabs, VocabMode::Fixed)
        .map_err(|e| CliError::at(path, e))?;
    Ok(triples)
}

pub fn build_graph(vocabs: &Vocabs, triples: &[Triple], inverses: bool) -> CliResult<Graph> {
    Ok(Graph::build(
        vocabs.entities.len(),
        vocabs.relations.len(),
        triples.iter().copied(),
        GraphOptions {
            self_loops: true,
            inverses,
        },
    )?)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes a file through a buffered writer, mapping every failure to exit 2.
pub fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> kgwalk_core::Result<()>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| CliError::at(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let reader = open(path)?;
    serde_json::from_reader(reader)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string(value)
        .map_err(|e| CliError::invalid(format!("cannot serialize {}: {e}", path.display())))?;
    write_string(path, &(text + "\n"))
}
