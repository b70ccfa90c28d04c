use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kgwalk_core::env::{EnvConfig, RewardMode, WalkEnv};
use kgwalk_core::eval::{evaluate, RankMode};
use kgwalk_core::policy::AgentCheckpoint;
use kgwalk_core::Policy;
use serde::{Deserialize, Serialize};

use super::shaper::VocabArgs;
use super::{known_answers, read_all, required, resolve_out, set, set_list, Common};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub agent: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub known: Vec<PathBuf>,
    pub entities: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub mode: RankMode,
    /// The agent's training beam width when unset.
    pub beam: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            agent: None,
            graph: None,
            test: None,
            known: Vec::new(),
            entities: None,
            relations: None,
            mode: RankMode::Filtered,
            beam: None,
            out: None,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Agent checkpoint (agent.json).
    #[arg(long, value_name = "JSON")]
    pub agent: Option<PathBuf>,
    /// Graph the agent walks; must match the one it was trained on.
    #[arg(long, value_name = "TSV")]
    pub graph: Option<PathBuf>,
    /// Test triples; each becomes the query (head, relation, ?).
    #[arg(long, value_name = "TSV")]
    pub test: Option<PathBuf>,
    /// True triples excluded from filtered ranks (train, dev, …).
    #[arg(long, value_name = "TSV", num_args = 1..)]
    pub known: Vec<PathBuf>,
    #[command(flatten)]
    pub vocab: VocabArgs,
    /// raw or filtered [default: filtered]
    #[arg(long)]
    pub mode: Option<RankMode>,
    /// Beam width [default: the agent's]
    #[arg(long)]
    pub beam: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(args: Args) -> CliResult<()> {
    let mut cfg: EvalConfig = load_config(args.common.config.as_deref(), "eval")?;
    set!(cfg.agent, args.agent.map(Some));
    set!(cfg.graph, args.graph.map(Some));
    set!(cfg.test, args.test.map(Some));
    set_list(&mut cfg.known, args.known);
    set!(cfg.entities, args.vocab.entities.map(Some));
    set!(cfg.relations, args.vocab.relations.map(Some));
    set!(cfg.mode, args.mode);
    set!(cfg.beam, args.beam.map(Some));
    if cfg.beam == Some(0) {
        return Err(CliError::invalid("--beam must be positive"));
    }
    let agent_path = required(&cfg.agent, "--agent")?.to_path_buf();
    let graph_path = required(&cfg.graph, "--graph")?.to_path_buf();
    let test_path = required(&cfg.test, "--test")?.to_path_buf();
    let out = resolve_out(args.common.out, &mut cfg.out)?;

    let extra: Vec<PathBuf> = std::iter::once(&test_path).chain(&cfg.known).cloned().collect();
    let (mut vocabs, vocab_files) = data::resolve_vocabs(
        &graph_path,
        cfg.entities.as_deref(),
        cfg.relations.as_deref(),
        &extra,
    )?;
    let ckpt: AgentCheckpoint = data::read_json(&agent_path)?;
    if ckpt.vocab_sha != vocabs.checksum() {
        return Err(CliError::Incompatible(format!(
            "{}: agent vocabulary checksum {} differs from {}",
            agent_path.display(),
            ckpt.vocab_sha,
            vocabs.checksum()
        )));
    }
    let inverses = ckpt.meta.get("inverses").is_none_or(|v| v == "true");
    let triples = data::read_triples(&graph_path, &mut vocabs)?;
    let graph = data::build_graph(&vocabs, &triples, inverses)?;
    let test = data::read_triples(&test_path, &mut vocabs)?;
    let known_sets = read_all(&cfg.known, &mut vocabs)?;
    let params: Policy = ckpt.params().map_err(|e| CliError::at(&agent_path, e))?;
    let shape = params.shape();
    if shape.num_entities != graph.num_entities() || shape.relation_slots != graph.relation_slots() {
        return Err(CliError::invalid(format!(
            "{}: agent expects {} entities and {} relation slots, graph has {} and {}",
            agent_path.display(),
            shape.num_entities,
            shape.relation_slots,
            graph.num_entities(),
            graph.relation_slots()
        )));
    }
    let env = WalkEnv::new(
        &graph,
        EnvConfig {
            horizon: ckpt.config.horizon,
            reward_mode: RewardMode::Binary,
            mask_query_edge: false,
        },
        None,
    )?;
    let known = known_answers(
        [graph.facts(), test.as_slice()]
            .into_iter()
            .chain(known_sets.iter().map(Vec::as_slice)),
    );
    let beam = cfg.beam.unwrap_or(ckpt.config.beam_width);
    let report = evaluate(&params, &env, &test, beam, cfg.mode, &known)?;

    data::write_string(&out.join("report.txt"), &report.to_table())?;
    data::write_string(&out.join("report.kv"), &report.to_kv())?;
    let mut ranks = String::new();
    for q in &report.per_query {
        let _ = writeln!(
            ranks,
            "{}\t{}\t{}\t{}",
            vocabs.entities.name(q.query.source),
            vocabs.relations.name(q.query.relation),
            vocabs.entities.name(q.query.answer.unwrap_or(q.query.source)),
            q.rank
        );
    }
    data::write_string(&out.join("ranks.tsv"), &ranks)?;
    for line in report.to_kv().lines() {
        log::info!("{line}");
    }

    let mut inputs: Vec<&Path> = vec![agent_path.as_path(), graph_path.as_path()];
    inputs.extend(vocab_files.iter().map(PathBuf::as_path));
    inputs.extend(extra.iter().map(PathBuf::as_path));
    write_manifest(&out, "eval", &cfg, &inputs, &["report.txt", "report.kv", "ranks.tsv"])?;
    Ok(())
}
