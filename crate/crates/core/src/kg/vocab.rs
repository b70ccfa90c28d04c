use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense name ↔ id interning table. Ids are assigned in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for name in names {
            let name = name.into();
            if vocab.index.contains_key(&name) {
                return Err(Error::Format(format!("duplicate vocabulary entry '{name}'")));
            }
            vocab.intern(&name);
        }
        Ok(vocab)
    }

    /// Returns the id of `name`, assigning the next free id if it is new.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Reads the one-name-per-line vocabulary format (line number = id).
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut vocab = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let name = line.strip_suffix('\r').unwrap_or(&line);
            if name.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty vocabulary entry".into(),
                });
            }
            if vocab.get(name).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate vocabulary entry '{name}'"),
                });
            }
            vocab.intern(name);
        }
        Ok(vocab)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for name in &self.names {
            writeln!(writer, "{name}")?;
        }
        Ok(())
    }
}

/// Entity and relation vocabularies of one dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabs {
    pub entities: Vocab,
    pub relations: Vocab,
}

impl Vocabs {
    pub fn new(entities: Vocab, relations: Vocab) -> Self {
        Self { entities, relations }
    }

    /// SHA-256 (lowercase hex) over the two vocabulary files as written:
    /// each entity name followed by LF, one NUL byte, then each relation name
    /// followed by LF.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for name in self.entities.names() {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hasher.update([0u8]);
        for name in self.relations.names() {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    /// Human-readable label for a relation slot, including reserved ids.
    pub fn relation_label(&self, relation: usize) -> String {
        let r = self.relations.len();
        match relation {
            id if id < r => self.relations.name(id).to_owned(),
            id if id < 2 * r => format!("_inv_{}", self.relations.name(id - r)),
            id if id == 2 * r => "SELF_LOOP".to_owned(),
            _ => "NO_OP".to_owned(),
        }
    }
}
