use std::collections::BTreeSet;
use std::path::PathBuf;

use kgwalk_core::eval::{evaluate_with, rank_scores, RankMode, RankingReport};
use kgwalk_core::kg::{Triple, Vocabs};
use kgwalk_core::shaper::{train_shaper, ScoreTable, ShaperCheckpoint, ShaperKind, TrainConfig};
use kgwalk_core::Shaper;
use serde::{Deserialize, Serialize};

use super::{known_answers, read_all, required, resolve_out, set, set_list, Common};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::manifest::{load_config, write_manifest};

pub const CHECKPOINT_FILE: &str = "shaper.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShaperConfig {
    pub graph: Option<PathBuf>,
    pub model: ShaperKind,
    pub dev: Option<PathBuf>,
    pub known: Vec<PathBuf>,
    pub entities: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub training: TrainConfig,
    pub out: Option<PathBuf>,
}

impl Default for ShaperConfig {
    fn default() -> Self {
        Self {
            graph: None,
            model: ShaperKind::DistMult,
            dev: None,
            known: Vec::new(),
            entities: None,
            relations: None,
            training: TrainConfig::default(),
            out: None,
        }
    }
}

/// Vocabulary flags. Without them `entities.txt`/`relations.txt` next to the
/// graph are used, or else names are collected from the input files.
#[derive(Debug, clap::Args)]
pub struct VocabArgs {
    #[arg(long, value_name = "TXT")]
    pub entities: Option<PathBuf>,
    #[arg(long, value_name = "TXT")]
    pub relations: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Training triples (the rich or the sparse graph).
    #[arg(long, value_name = "TSV")]
    pub graph: Option<PathBuf>,
    /// distmult or complex [default: distmult]
    #[arg(long)]
    pub model: Option<ShaperKind>,
    /// Dev triples; when given, a filtered ranking report is written.
    #[arg(long, value_name = "TSV")]
    pub dev: Option<PathBuf>,
    /// Further true triples excluded from filtered ranks.
    #[arg(long, value_name = "TSV", num_args = 1..)]
    pub known: Vec<PathBuf>,
    #[command(flatten)]
    pub vocab: VocabArgs,
    /// Embedding width [default: 64]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Adam step size [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 500]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// (head, relation) rows per update [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 0.1]
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    /// [default: 1e-5]
    #[arg(long)]
    pub l2: Option<f64>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

/// Ranks every dev tail by shaper score.
pub fn shaper_report(
    model: &Shaper,
    dev: &[Triple],
    known: &kgwalk_core::eval::KnownAnswers,
) -> kgwalk_core::Result<RankingReport> {
    evaluate_with(dev, RankMode::Filtered, known, model.num_entities(), |q| {
        let scores: Vec<f64> = model.score_tails(q.source, q.relation);
        Ok(rank_scores(&scores))
    })
}

pub fn run_train(args: TrainArgs) -> CliResult<()> {
    let mut cfg: ShaperConfig = load_config(args.common.config.as_deref(), "train-shaper")?;
    set!(cfg.graph, args.graph.map(Some));
    set!(cfg.model, args.model);
    set!(cfg.dev, args.dev.map(Some));
    set_list(&mut cfg.known, args.known);
    set!(cfg.entities, args.vocab.entities.map(Some));
    set!(cfg.relations, args.vocab.relations.map(Some));
    let t = &mut cfg.training;
    set!(t.dim, args.dim);
    set!(t.learning_rate, args.lr);
    set!(t.epochs, args.epochs);
    set!(t.batch_size, args.batch_size);
    set!(t.label_smoothing, args.label_smoothing);
    set!(t.l2, args.l2);
    set!(t.seed, args.seed);
    cfg.training.validate()?;
    let graph_path = required(&cfg.graph, "--graph")?.to_path_buf();
    let out = resolve_out(args.common.out, &mut cfg.out)?;

    let extra: Vec<PathBuf> = cfg.dev.iter().chain(&cfg.known).cloned().collect();
    let (mut vocabs, vocab_files) = data::resolve_vocabs(
        &graph_path,
        cfg.entities.as_deref(),
        cfg.relations.as_deref(),
        &extra,
    )?;
    let triples = data::read_triples(&graph_path, &mut vocabs)?;
    let graph = data::build_graph(&vocabs, &triples, true)?;
    let dev = match &cfg.dev {
        Some(p) => Some(data::read_triples(p, &mut vocabs)?),
        None => None,
    };
    let known_sets = read_all(&cfg.known, &mut vocabs)?;

    log::info!(
        "training {} dim={} on {} facts for {} epochs",
        cfg.model,
        cfg.training.dim,
        graph.num_facts(),
        cfg.training.epochs
    );
    let model: Shaper = train_shaper(&graph, cfg.model, &cfg.training)?;
    let log: String = model
        .loss_curve
        .iter()
        .enumerate()
        .map(|(i, l)| format!("epoch={} loss={l:.6}\n", i + 1))
        .collect();
    data::write_string(&out.join("train.log"), &log)?;
    data::write_json(&out.join(CHECKPOINT_FILE), &model.to_checkpoint(&vocabs.checksum()))?;
    let mut outputs = vec![CHECKPOINT_FILE, "train.log"];

    if let Some(dev) = &dev {
        let known = known_answers(
            [graph.facts(), dev.as_slice()]
                .into_iter()
                .chain(known_sets.iter().map(Vec::as_slice)),
        );
        let report = shaper_report(&model, dev, &known)?;
        log::info!("dev {}", report.to_kv().trim_end().replace('\n', " "));
        data::write_string(&out.join("dev_report.kv"), &report.to_kv())?;
        outputs.push("dev_report.kv");
    }

    let mut inputs = vec![graph_path.as_path()];
    inputs.extend(vocab_files.iter().map(PathBuf::as_path));
    inputs.extend(extra.iter().map(PathBuf::as_path));
    write_manifest(&out, "train-shaper", &cfg, &inputs, &outputs)?;
    Ok(())
}

/// Loads a shaper checkpoint and checks it against the vocabularies.
pub fn load_checkpoint(path: &std::path::Path, vocabs: &Vocabs) -> CliResult<Shaper> {
    let ckpt: ShaperCheckpoint = data::read_json(path)?;
    if ckpt.vocab_sha != vocabs.checksum() {
        return Err(CliError::Incompatible(format!(
            "{}: shaper vocabulary checksum {} differs from {}",
            path.display(),
            ckpt.vocab_sha,
            vocabs.checksum()
        )));
    }
    Shaper::from_checkpoint(&ckpt).map_err(|e| CliError::at(path, e))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub shaper: Option<PathBuf>,
    pub queries: Vec<PathBuf>,
    pub entities: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ExportArgs {
    /// Shaper checkpoint written by train-shaper.
    #[arg(long, value_name = "JSON")]
    pub shaper: Option<PathBuf>,
    /// Triple files whose (head, relation) pairs are scored against every tail.
    #[arg(long, value_name = "TSV", num_args = 1..)]
    pub queries: Vec<PathBuf>,
    #[command(flatten)]
    pub vocab: VocabArgs,
    #[command(flatten)]
    pub common: Common,
}

pub fn run_export(args: ExportArgs) -> CliResult<()> {
    let mut cfg: ExportConfig = load_config(args.common.config.as_deref(), "export-scores")?;
    set!(cfg.shaper, args.shaper.map(Some));
    set_list(&mut cfg.queries, args.queries);
    set!(cfg.entities, args.vocab.entities.map(Some));
    set!(cfg.relations, args.vocab.relations.map(Some));
    let shaper_path = required(&cfg.shaper, "--shaper")?.to_path_buf();
    let Some((first, rest)) = cfg.queries.split_first() else {
        return Err(CliError::invalid("--queries needs at least one file"));
    };
    let out = resolve_out(args.common.out, &mut cfg.out)?;

    let (mut vocabs, vocab_files) =
        data::resolve_vocabs(first, cfg.entities.as_deref(), cfg.relations.as_deref(), rest)?;
    let model = load_checkpoint(&shaper_path, &vocabs)?;
    let pairs: BTreeSet<(usize, usize)> = read_all(&cfg.queries, &mut vocabs)?
        .iter()
        .flatten()
        .map(|t| (t.head, t.relation))
        .collect();
    let table = ScoreTable::from_model(&model, &vocabs, pairs)?;
    data::write_with(&out.join("scores.tsv"), |w| table.write(w, &vocabs))?;
    log::info!("scored {} (head, relation) pairs", table.entries.len());

    let mut inputs = vec![shaper_path.as_path()];
    inputs.extend(vocab_files.iter().map(PathBuf::as_path));
    inputs.extend(cfg.queries.iter().map(PathBuf::as_path));
    write_manifest(&out, "export-scores", &cfg, &inputs, &["scores.tsv"])?;
    Ok(())
}
