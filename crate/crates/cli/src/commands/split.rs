use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use kgwalk_core::kg::{parse_triples_into, write_triples, Graph, GraphOptions, VocabMode, Vocabs};
use kgwalk_core::split::{mask_split, verify_split, SplitSpec};
use serde::{Deserialize, Serialize};

use super::{required, resolve_out, set, set_list, Common};
use crate::data::{self, ENTITIES_FILE, RELATIONS_FILE};
use crate::error::{CliError, CliResult};
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub input: Option<PathBuf>,
    pub queries: Vec<PathBuf>,
    pub node_ratio: f64,
    pub edge_ratio: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let spec = SplitSpec::default();
        Self {
            input: None,
            queries: Vec::new(),
            node_ratio: spec.node_mask_ratio,
            edge_ratio: spec.edge_mask_ratio,
            seed: spec.seed,
            out: None,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Rich graph triples (head<TAB>relation<TAB>tail).
    #[arg(long = "in", value_name = "TSV")]
    pub input: Option<PathBuf>,
    /// Held-out query triples to count as answerable or not after masking.
    /// Their names join the vocabulary.
    #[arg(long, value_name = "TSV", num_args = 1..)]
    pub queries: Vec<PathBuf>,
    /// Fraction of entities to mask [default: 0.5].
    #[arg(long)]
    pub node_ratio: Option<f64>,
    /// Fraction of surviving facts to mask [default: 0.5].
    #[arg(long)]
    pub edge_ratio: Option<f64>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

const OUTPUTS: [&str; 7] = [
    "rich.tsv",
    "sparse.tsv",
    "masked_entities.txt",
    "masked_triples.tsv",
    "split_report.txt",
    ENTITIES_FILE,
    RELATIONS_FILE,
];

fn check_ratio(flag: &str, value: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CliError::invalid(format!("{flag} must lie in [0, 1], got {value}")))
    }
}

fn intern(path: &Path, vocabs: &mut Vocabs) -> CliResult<Vec<kgwalk_core::kg::Triple>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (triples, duplicates) = parse_triples_into(BufReader::new(file), vocabs, VocabMode::Extend)
        .map_err(|e| CliError::at(path, e))?;
    if duplicates > 0 {
        log::warn!("{}: dropped {duplicates} duplicate triples", path.display());
    }
    Ok(triples)
}

pub fn run(args: Args) -> CliResult<()> {
    let mut cfg: SplitConfig = load_config(args.common.config.as_deref(), "split")?;
    set!(cfg.input, args.input.map(Some));
    set_list(&mut cfg.queries, args.queries);
    set!(cfg.node_ratio, args.node_ratio);
    set!(cfg.edge_ratio, args.edge_ratio);
    set!(cfg.seed, args.seed);
    check_ratio("--node-ratio", cfg.node_ratio)?;
    check_ratio("--edge-ratio", cfg.edge_ratio)?;
    let input = required(&cfg.input, "--in")?.to_path_buf();
    let out = resolve_out(args.common.out, &mut cfg.out)?;

    let mut vocabs = Vocabs::default();
    let triples = intern(&input, &mut vocabs)?;
    let mut queries = Vec::new();
    for q in &cfg.queries {
        queries.extend(intern(q, &mut vocabs)?);
    }
    let rich = Graph::build(
        vocabs.entities.len(),
        vocabs.relations.len(),
        triples,
        GraphOptions::default(),
    )?;
    let spec = SplitSpec {
        node_mask_ratio: cfg.node_ratio,
        edge_mask_ratio: cfg.edge_ratio,
        seed: cfg.seed,
        ..SplitSpec::default()
    };
    let result = mask_split(&rich, &spec)?;
    let report = verify_split(&result, &queries)?;

    data::write_with(&out.join("rich.tsv"), |w| write_triples(w, &vocabs, result.rich.facts()))?;
    data::write_with(&out.join("sparse.tsv"), |w| {
        write_triples(w, &vocabs, result.sparse.facts())
    })?;
    let masked: String = result
        .masked_entities
        .iter()
        .map(|&e| format!("{}\n", vocabs.entities.name(e)))
        .collect();
    data::write_string(&out.join("masked_entities.txt"), &masked)?;
    let masked_triples: Vec<_> = result.masked_triples.iter().copied().collect();
    data::write_with(&out.join("masked_triples.tsv"), |w| {
        write_triples(w, &vocabs, &masked_triples)
    })?;
    data::write_string(&out.join("split_report.txt"), &report.to_kv())?;
    data::write_with(&out.join(ENTITIES_FILE), |w| vocabs.entities.write(w))?;
    data::write_with(&out.join(RELATIONS_FILE), |w| vocabs.relations.write(w))?;

    let mut inputs = vec![input.as_path()];
    inputs.extend(cfg.queries.iter().map(PathBuf::as_path));
    write_manifest(&out, "split", &cfg, &inputs, &OUTPUTS)?;
    for line in report.to_kv().lines() {
        log::info!("{line}");
    }
    Ok(())
}
