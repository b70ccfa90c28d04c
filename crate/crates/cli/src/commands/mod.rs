pub mod agent;
pub mod eval;
pub mod shaper;
pub mod split;

use std::path::{Path, PathBuf};

use kgwalk_core::eval::KnownAnswers;
use kgwalk_core::kg::{Triple, Vocabs};

use crate::data;
use crate::error::{CliError, CliResult};

/// Flags shared by every subcommand.
#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML config file; a manifest.toml from an earlier run also works.
    #[arg(long, value_name = "TOML")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = "KGWALK_OUT_DIR")]
    pub out: Option<PathBuf>,
}

/// Overwrites `$dst` with a flag value when the flag was given.
macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}
pub(crate) use set;

/// Replaces a list setting when the flag was given at least once.
pub fn set_list(dst: &mut Vec<PathBuf>, src: Vec<PathBuf>) {
    if !src.is_empty() {
        *dst = src;
    }
}

/// Flag (or environment) beats config file; the result is stored back so the
/// manifest records it.
pub fn resolve_out(flag: Option<PathBuf>, cfg: &mut Option<PathBuf>) -> CliResult<PathBuf> {
    if let Some(p) = flag {
        *cfg = Some(p);
    }
    let out = cfg
        .clone()
        .ok_or_else(|| CliError::invalid("--out is required (or set KGWALK_OUT_DIR)"))?;
    data::create_dir(&out)?;
    Ok(out)
}

pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::invalid(format!("{flag} is required")))
}

/// Reads triple files against fixed vocabularies and collects them.
pub fn read_all(paths: &[PathBuf], vocabs: &mut Vocabs) -> CliResult<Vec<Vec<Triple>>> {
    paths.iter().map(|p| data::read_triples(p, vocabs)).collect()
}

pub fn known_answers<'a>(sets: impl IntoIterator<Item = &'a [Triple]>) -> KnownAnswers {
    KnownAnswers::from_triples(sets.into_iter().flatten())
}
