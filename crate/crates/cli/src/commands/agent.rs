use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use kgwalk_core::env::{EnvConfig, RewardMode, WalkEnv};
use kgwalk_core::eval::RankMode;
use kgwalk_core::kg::{Query, Vocabs};
use kgwalk_core::policy::{train_agent, AgentCheckpoint, AgentConfig, DevSet, TrainState};
use kgwalk_core::shaper::{train_shaper, MissingScore, ScoreProvider, ScoreTable, ShaperKind, TrainConfig};
use kgwalk_core::{AgentState, Shaper};
use serde::{Deserialize, Serialize};

use super::shaper::{load_checkpoint, VocabArgs};
use super::{known_answers, read_all, required, resolve_out, set, set_list, Common};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::manifest::{load_config, write_manifest};

pub const BEST_FILE: &str = "agent.json";
pub const LAST_FILE: &str = "agent_last.json";
pub const LOG_FILE: &str = "train.log";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentRunConfig {
    pub graph: Option<PathBuf>,
    /// Training queries; the walk graph's own facts when unset.
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub known: Vec<PathBuf>,
    pub entities: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub inverses: bool,
    /// Shaped when a shaper is given, binary otherwise.
    pub reward: Option<RewardMode>,
    pub shaper: String,
    pub shaper_graph: Option<PathBuf>,
    pub shaper_training: TrainConfig,
    pub missing_score: MissingScore,
    pub dev_mode: RankMode,
    pub resume: Option<PathBuf>,
    pub agent: AgentConfig,
    pub out: Option<PathBuf>,
}

impl Default for AgentRunConfig {
    fn default() -> Self {
        Self {
            graph: None,
            train: None,
            dev: None,
            known: Vec::new(),
            entities: None,
            relations: None,
            inverses: true,
            reward: None,
            shaper: "none".into(),
            shaper_graph: None,
            shaper_training: TrainConfig::default(),
            missing_score: MissingScore::Error,
            dev_mode: RankMode::Filtered,
            resume: None,
            agent: AgentConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Graph the agent walks (usually sparse.tsv).
    #[arg(long, value_name = "TSV")]
    pub graph: Option<PathBuf>,
    /// Training query triples [default: the facts of --graph]
    #[arg(long, value_name = "TSV")]
    pub train: Option<PathBuf>,
    /// Dev triples for periodic evaluation and best-checkpoint selection.
    #[arg(long, value_name = "TSV")]
    pub dev: Option<PathBuf>,
    /// Further true triples excluded from filtered dev ranks.
    #[arg(long, value_name = "TSV", num_args = 1..)]
    pub known: Vec<PathBuf>,
    #[command(flatten)]
    pub vocab: VocabArgs,
    /// binary or shaped [default: shaped with --shaper, else binary]
    #[arg(long)]
    pub reward: Option<RewardMode>,
    /// none | table:PATH | ckpt:PATH | embed:distmult | embed:complex | PATH
    #[arg(long, value_name = "SOURCE")]
    pub shaper: Option<String>,
    /// Triples an embed: shaper is trained on (usually rich.tsv).
    #[arg(long, value_name = "TSV")]
    pub shaper_graph: Option<PathBuf>,
    /// What a score table does for an unlisted (head, relation): error or zero.
    #[arg(long)]
    pub missing_score: Option<MissingScore>,
    /// Omit inverse edges from the walk graph.
    #[arg(long)]
    pub no_inverses: bool,
    /// Keep the query's own edge visible during training walks.
    #[arg(long)]
    pub no_mask_query_edge: bool,
    /// Continue from a checkpoint (agent_last.json) up to --epochs.
    #[arg(long, value_name = "JSON")]
    pub resume: Option<PathBuf>,
    /// [default: 1000]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Rollouts per update [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 4]
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Embedding width d_p [default: 32]
    #[arg(long)]
    pub entity_dim: Option<usize>,
    /// LSTM width d_h [default: 64]
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Path length T [default: 3]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Initial entropy weight [default: 0.02]
    #[arg(long)]
    pub entropy: Option<f64>,
    /// Multiplier applied to the entropy weight [default: 0.9]
    #[arg(long)]
    pub entropy_decay: Option<f64>,
    /// Epochs between entropy decays [default: 50]
    #[arg(long)]
    pub entropy_decay_every: Option<usize>,
    /// Baseline moving-average factor [default: 0.95]
    #[arg(long)]
    pub baseline_decay: Option<f64>,
    /// Dev beam width [default: 32]
    #[arg(long)]
    pub beam: Option<usize>,
    /// Epochs between dev evaluations [default: 50]
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

fn apply(args: Args, cfg: &mut AgentRunConfig) -> Common {
    set!(cfg.graph, args.graph.map(Some));
    set!(cfg.train, args.train.map(Some));
    set!(cfg.dev, args.dev.map(Some));
    set_list(&mut cfg.known, args.known);
    set!(cfg.entities, args.vocab.entities.map(Some));
    set!(cfg.relations, args.vocab.relations.map(Some));
    set!(cfg.reward, args.reward.map(Some));
    set!(cfg.shaper, args.shaper);
    set!(cfg.shaper_graph, args.shaper_graph.map(Some));
    set!(cfg.missing_score, args.missing_score);
    set!(cfg.resume, args.resume.map(Some));
    if args.no_inverses {
        cfg.inverses = false;
    }
    let a = &mut cfg.agent;
    if args.no_mask_query_edge {
        a.mask_query_edge = false;
    }
    set!(a.epochs, args.epochs);
    set!(a.batch_size, args.batch_size);
    set!(a.rollouts_per_query, args.rollouts);
    set!(a.learning_rate, args.lr);
    set!(a.entity_dim, args.entity_dim);
    set!(a.hidden_dim, args.hidden_dim);
    set!(a.horizon, args.horizon);
    set!(a.entropy_weight, args.entropy);
    set!(a.entropy_decay, args.entropy_decay);
    set!(a.entropy_decay_every, args.entropy_decay_every);
    set!(a.baseline_decay, args.baseline_decay);
    set!(a.beam_width, args.beam);
    set!(a.eval_every, args.eval_every);
    set!(a.seed, args.seed);
    args.common
}

/// Where shaped rewards come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ShaperSource {
    None,
    Table(PathBuf),
    Checkpoint(PathBuf),
    Embed(ShaperKind),
}

impl ShaperSource {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let bad = |m: String| CliError::invalid(format!("--shaper {spec}: {m}"));
        Ok(match spec.split_once(':') {
            _ if spec == "none" || spec.is_empty() => ShaperSource::None,
            Some(("table", p)) => ShaperSource::Table(p.into()),
            Some(("ckpt", p)) => ShaperSource::Checkpoint(p.into()),
            Some(("embed", k)) => ShaperSource::Embed(k.parse().map_err(|e| bad(format!("{e}")))?),
            _ => ShaperSource::Checkpoint(spec.into()),
        })
    }
}

fn load_provider(
    cfg: &AgentRunConfig,
    source: &ShaperSource,
    vocabs: &mut Vocabs,
    inputs: &mut Vec<PathBuf>,
) -> CliResult<Option<Box<dyn ScoreProvider>>> {
    Ok(match source {
        ShaperSource::None => None,
        ShaperSource::Table(p) => {
            inputs.push(p.clone());
            let file = File::open(p).map_err(|e| CliError::io(p, e))?;
            let table = ScoreTable::read(BufReader::new(file), vocabs)
                .map_err(|e| CliError::at(p, e))?
                .with_missing(cfg.missing_score);
            log::info!("score table {} covers {} pairs", p.display(), table.entries.len());
            Some(Box::new(table))
        }
        ShaperSource::Checkpoint(p) => {
            inputs.push(p.clone());
            Some(Box::new(load_checkpoint(p, vocabs)?))
        }
        ShaperSource::Embed(kind) => {
            let p = required(&cfg.shaper_graph, "--shaper-graph")?;
            inputs.push(p.to_path_buf());
            let triples = data::read_triples(p, vocabs)?;
            let graph = data::build_graph(vocabs, &triples, true)?;
            cfg.shaper_training.validate()?;
            log::info!("training {kind} shaper on {} facts", graph.num_facts());
            let model: Shaper = train_shaper(&graph, *kind, &cfg.shaper_training)?;
            Some(Box::new(model))
        }
    })
}

fn read_checkpoint(path: &Path, vocabs: &Vocabs) -> CliResult<AgentCheckpoint> {
    let ckpt: AgentCheckpoint = data::read_json(path)?;
    if ckpt.vocab_sha != vocabs.checksum() {
        return Err(CliError::Incompatible(format!(
            "{}: agent vocabulary checksum {} differs from {}",
            path.display(),
            ckpt.vocab_sha,
            vocabs.checksum()
        )));
    }
    Ok(ckpt)
}

/// Log lines of an earlier run up to (and including) `epoch`.
fn earlier_log(path: &Path, epoch: usize) -> Vec<String> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .filter(|l| {
            l.strip_prefix("epoch=")
                .and_then(|r| r.split(' ').next())
                .and_then(|n| n.parse::<usize>().ok())
                .is_some_and(|n| n <= epoch)
        })
        .map(str::to_owned)
        .collect()
}

fn meta_mrr(ckpt: &AgentCheckpoint) -> Option<f64> {
    ckpt.meta.get("dev_mrr").and_then(|v| v.parse().ok())
}

pub fn run(args: Args) -> CliResult<()> {
    let mut cfg: AgentRunConfig = load_config(args.common.config.as_deref(), "train-agent")?;
    let common = apply(args, &mut cfg);
    cfg.agent.validate()?;
    let source = ShaperSource::parse(&cfg.shaper)?;
    let reward = match (cfg.reward, &source) {
        (Some(RewardMode::Shaped), ShaperSource::None) => {
            return Err(CliError::invalid("--reward shaped needs --shaper"))
        }
        (Some(RewardMode::Binary), s) if *s != ShaperSource::None => {
            log::warn!("--reward binary ignores --shaper {}", cfg.shaper);
            RewardMode::Binary
        }
        (Some(r), _) => r,
        (None, ShaperSource::None) => RewardMode::Binary,
        (None, _) => RewardMode::Shaped,
    };
    cfg.reward = Some(reward);
    let graph_path = required(&cfg.graph, "--graph")?.to_path_buf();
    let out = resolve_out(common.out, &mut cfg.out)?;

    let extra: Vec<PathBuf> = cfg
        .train
        .iter()
        .chain(&cfg.dev)
        .chain(&cfg.known)
        .chain(&cfg.shaper_graph)
        .cloned()
        .collect();
    let (mut vocabs, vocab_files) = data::resolve_vocabs(
        &graph_path,
        cfg.entities.as_deref(),
        cfg.relations.as_deref(),
        &extra,
    )?;
    let mut inputs: Vec<PathBuf> = vec![graph_path.clone()];
    inputs.extend(vocab_files);
    let triples = data::read_triples(&graph_path, &mut vocabs)?;
    let graph = data::build_graph(&vocabs, &triples, cfg.inverses)?;
    let train_triples = match &cfg.train {
        Some(p) => {
            inputs.push(p.clone());
            data::read_triples(p, &mut vocabs)?
        }
        None => triples.clone(),
    };
    let queries: Vec<Query> = train_triples.iter().map(Query::from_triple).collect();
    let dev_triples = match &cfg.dev {
        Some(p) => {
            inputs.push(p.clone());
            Some(data::read_triples(p, &mut vocabs)?)
        }
        None => None,
    };
    inputs.extend(cfg.known.iter().cloned());
    let known_sets = read_all(&cfg.known, &mut vocabs)?;
    let provider = match reward {
        RewardMode::Binary => None,
        RewardMode::Shaped => load_provider(&cfg, &source, &mut vocabs, &mut inputs)?,
    };

    let env = WalkEnv::new(
        &graph,
        EnvConfig {
            horizon: cfg.agent.horizon,
            reward_mode: reward,
            mask_query_edge: cfg.agent.mask_query_edge,
        },
        provider.as_deref(),
    )?;
    let dev_env = WalkEnv::new(
        &graph,
        EnvConfig {
            horizon: cfg.agent.horizon,
            reward_mode: RewardMode::Binary,
            mask_query_edge: false,
        },
        None,
    )?;
    let known = known_answers(
        [graph.facts(), train_triples.as_slice()]
            .into_iter()
            .chain(dev_triples.as_deref())
            .chain(known_sets.iter().map(Vec::as_slice)),
    );
    let dev = dev_triples.as_deref().map(|triples| DevSet {
        env: &dev_env,
        triples,
        known: &known,
        mode: cfg.dev_mode,
    });

    let shape = cfg.agent.shape_for(graph.num_entities(), graph.relation_slots());
    let mut log_lines = Vec::new();
    let mut previous_best = None;
    let state: AgentState = match &cfg.resume {
        Some(p) => {
            inputs.push(p.clone());
            let ckpt = read_checkpoint(p, &vocabs)?;
            if ckpt.policy_shape() != shape {
                return Err(CliError::invalid(format!(
                    "{}: checkpoint shape {:?} does not match {:?}",
                    p.display(),
                    ckpt.policy_shape(),
                    shape
                )));
            }
            log_lines = earlier_log(&out.join(LOG_FILE), ckpt.epoch);
            let best_path = out.join(BEST_FILE);
            if best_path.is_file() {
                previous_best = Some(read_checkpoint(&best_path, &vocabs)?);
            }
            log::info!("resuming {} at epoch {}", p.display(), ckpt.epoch);
            ckpt.restore().map_err(|e| CliError::at(p, e))?
        }
        None => TrainState::new(&cfg.agent, shape),
    };

    log::info!(
        "training agent: reward={} shaper={} queries={} epochs={}",
        reward_name(reward),
        cfg.shaper,
        queries.len(),
        cfg.agent.epochs
    );
    let outcome = train_agent(state, &env, &queries, &cfg.agent, dev.as_ref(), |entry| {
        let line = entry.to_line();
        log::info!("{line}");
        log_lines.push(line);
    })?;

    let mut meta = BTreeMap::new();
    meta.insert("reward".to_owned(), reward_name(reward).to_owned());
    meta.insert("shaper".to_owned(), cfg.shaper.clone());
    meta.insert("inverses".to_owned(), cfg.inverses.to_string());
    meta.insert("graph".to_owned(), graph.fingerprint());
    let last = AgentCheckpoint::capture(&outcome.last, &cfg.agent, &vocabs.checksum(), meta.clone());
    if let Some(report) = &outcome.best_report {
        meta.insert("dev_hits1".to_owned(), report.hits[0].to_string());
        meta.insert("dev_mrr".to_owned(), report.mrr.to_string());
    }
    let mut best = AgentCheckpoint::capture(&outcome.best, &cfg.agent, &vocabs.checksum(), meta);
    let mut best_report = outcome.best_report.as_ref();
    if let Some(prev) = previous_best {
        if let (Some(old), Some(new)) = (meta_mrr(&prev), meta_mrr(&best)) {
            // The earlier run's best still wins; its dev report is already on disk.
            if old >= new {
                best = prev;
                best_report = None;
            }
        }
    }

    data::write_json(&out.join(BEST_FILE), &best)?;
    data::write_json(&out.join(LAST_FILE), &last)?;
    data::write_string(&out.join(LOG_FILE), &(log_lines.join("\n") + "\n"))?;
    let mut outputs = vec![BEST_FILE, LAST_FILE, LOG_FILE];
    if outcome.best_report.is_some() {
        outputs.push("dev_report.kv");
    }
    if let Some(report) = best_report {
        data::write_string(&out.join("dev_report.kv"), &report.to_kv())?;
    }
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&out, "train-agent", &cfg, &input_refs, &outputs)?;
    Ok(())
}

fn reward_name(mode: RewardMode) -> &'static str {
    match mode {
        RewardMode::Binary => "binary",
        RewardMode::Shaped => "shaped",
    }
}
