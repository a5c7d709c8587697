//! Command-line front end: `synth`, `train`, `generate`, `evaluate`,
//! `topics`, and `gates`. Every run writes its artifacts into one output
//! directory together with the fully-resolved config and a manifest of
//! input/output content hashes, so any result can be reproduced from the
//! directory alone.
//!
//! Exit codes: 0 success, 2 missing checkpoint, 3 malformed JSONL input,
//! 1 anything else.

use crate::checkpoint;
use crate::config::Config;
use crate::corpus::{
    encode_article, generate_synthetic, load_stop_words, read_jsonl, write_jsonl, Dataset,
    RawArticle, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::infer;
use crate::metrics;
use crate::model::Model;
use crate::train;
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "chorus",
    about = "Reader-aware diverse news comment generation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a synthetic topic-planted corpus.
    Synth(SynthArgs),
    /// Train a model on a JSONL corpus.
    Train(TrainArgs),
    /// Generate comments for articles with a trained model.
    Generate(GenerateArgs),
    /// Score generations against reference comments.
    Evaluate(EvaluateArgs),
    /// Report cluster sizes and per-topic top words.
    Topics(TopicsArgs),
    /// Dump per-token saliency decisions.
    Gates(GatesArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schema-checked `key=value` config overrides (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of planted topics.
    #[arg(long)]
    topics: usize,
    /// Number of articles.
    #[arg(long)]
    articles: usize,
    /// Comments per article.
    #[arg(long, default_value_t = 5)]
    comments: usize,
    /// Vocabulary size per topic.
    #[arg(long, default_value_t = 20)]
    words_per_topic: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training corpus (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Run directory for checkpoint, logs, and manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Trained model file.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Articles to comment on (JSONL).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `single`: one comment per article; `diverse`: n_diverse comments
    /// per article, one per top-ranked topic.
    #[arg(long, default_value = "single")]
    mode: GenMode,
    /// Schema-checked `key=value` config overrides (repeatable), applied
    /// on top of the checkpoint's config (e.g. beam_size).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GenMode {
    Single,
    Diverse,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["checkpoint", "generations"])))]
struct EvaluateArgs {
    /// Trained model file; hypotheses are generated on the fly.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Existing generations JSONL (as written by `generate`).
    #[arg(long)]
    generations: Option<PathBuf>,
    /// Articles with reference comments (JSONL).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep original casing instead of lowercasing tokens.
    #[arg(long)]
    no_lowercase: bool,
    /// Schema-checked `key=value` config overrides (repeatable), applied
    /// on top of the checkpoint's config.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct TopicsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comments to cluster (JSONL).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Words shown per topic.
    #[arg(long, default_value_t = 10)]
    top_m: usize,
    /// Stop-word file (one token per line), filtered from top-word lists.
    #[arg(long)]
    stop_words: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GatesArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Parses and runs one command, mapping errors to the documented exit
/// codes. The process wrapper passes `std::env::args_os()`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version by "erroring" with the text.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::MissingCheckpoint(_) => 2,
                Error::MalformedJsonl { .. } => 3,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Topics(a) => cmd_topics(a),
        Cmd::Gates(a) => cmd_gates(a),
    }
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Default, Serialize)]
struct Manifest {
    command: String,
    seed: Option<u64>,
    inputs: BTreeMap<String, FileStamp>,
    outputs: BTreeMap<String, FileStamp>,
}

#[derive(Debug, Serialize)]
struct FileStamp {
    path: String,
    sha256: String,
}

impl Manifest {
    fn new(command: &str, seed: Option<u64>) -> Self {
        Manifest {
            command: command.to_string(),
            seed,
            ..Default::default()
        }
    }

    fn input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.inputs.insert(label.to_string(), stamp(path)?);
        Ok(())
    }

    fn output(&mut self, label: &str, path: &Path) -> Result<()> {
        self.outputs.insert(label.to_string(), stamp(path)?);
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn stamp(path: &Path) -> Result<FileStamp> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(FileStamp {
        path: path.display().to_string(),
        sha256: format!("{:x}", h.finalize()),
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn echo_config(cfg: &Config, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("config.resolved.toml");
    cfg.save(&path)?;
    Ok(path)
}

fn load_model(path: &Path, overrides: &[String]) -> Result<Model> {
    let mut model = checkpoint::load(path)?;
    if !overrides.is_empty() {
        let mut cfg = model.cfg.clone();
        cfg.apply_overrides(overrides)?;
        model.cfg = cfg;
    }
    Ok(model)
}

fn encode_all(raw: &[RawArticle], model: &Model) -> Dataset {
    Dataset {
        articles: raw
            .iter()
            .map(|r| encode_article(r, &model.vocab, &model.cfg))
            .collect(),
    }
}

// ------------------------------------------------------------------ verbs

fn cmd_synth(a: SynthArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let spec = SyntheticSpec::disjoint(a.topics, a.words_per_topic, a.articles, a.comments, a.seed);
    let articles = generate_synthetic(&spec)?;
    let data_path = a.out.join("dataset.jsonl");
    write_jsonl(&data_path, &articles)?;
    let spec_path = a.out.join("synth_spec.json");
    std::fs::write(
        &spec_path,
        serde_json::to_string_pretty(&SynthEcho::from(&a)).expect("spec serializes") + "\n",
    )?;
    let mut m = Manifest::new("synth", Some(a.seed));
    m.output("dataset", &data_path)?;
    m.output("spec", &spec_path)?;
    m.write(&a.out)
}

#[derive(Debug, Serialize)]
struct SynthEcho {
    topics: usize,
    articles: usize,
    comments: usize,
    words_per_topic: usize,
    seed: u64,
}

impl From<&SynthArgs> for SynthEcho {
    fn from(a: &SynthArgs) -> Self {
        SynthEcho {
            topics: a.topics,
            articles: a.articles,
            comments: a.comments,
            words_per_topic: a.words_per_topic,
            seed: a.seed,
        }
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let cfg = a.config.resolve()?;
    let raw: Vec<RawArticle> = read_jsonl(&a.data)?;
    if raw.is_empty() {
        return Err(Error::Ingestion(format!(
            "{}: no articles",
            a.data.display()
        )));
    }
    let docs: Vec<&str> = raw
        .iter()
        .flat_map(|r| {
            std::iter::once(r.title.as_str())
                .chain(std::iter::once(r.body.as_str()))
                .chain(r.comments.iter().map(|c| c.as_str()))
        })
        .collect();
    let vocab = crate::corpus::build_vocab(docs, cfg.vocab_cap)?;
    let dataset = Dataset {
        articles: raw
            .iter()
            .map(|r| encode_article(r, &vocab, &cfg))
            .collect(),
    };

    let cfg_path = echo_config(&cfg, &a.out)?;
    let mut model = Model::new(cfg.clone(), vocab);
    let log_path = a.out.join("train_log.jsonl");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    let report = train::train(&mut model, &dataset, Some(&mut log))?;
    drop(log);

    let ckpt_path = a.out.join("model.ckpt");
    checkpoint::save(&model, &ckpt_path)?;
    std::fs::write(
        a.out.join("train_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;

    let mut m = Manifest::new("train", Some(cfg.seed));
    m.input("data", &a.data)?;
    if let Some(p) = &a.config.config {
        m.input("config", p)?;
    }
    m.output("config.resolved", &cfg_path)?;
    m.output("checkpoint", &ckpt_path)?;
    m.output("train_log", &log_path)?;
    m.output("train_report", &a.out.join("train_report.json"))?;
    m.write(&a.out)
}

/// One generation output line.
#[derive(Debug, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub article_id: usize,
    pub topic_id: Option<usize>,
    pub comment: String,
    pub score: f64,
    pub gates_summary: Option<GatesSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GatesSummary {
    pub kept: usize,
    pub total: usize,
    pub mean_beta: f64,
}

fn gates_summary(model: &Model, title: &[usize], body: &[usize]) -> Option<GatesSummary> {
    infer::gate_trace(model, title, body).map(|t| GatesSummary {
        kept: t.kept(),
        total: t.hard.len(),
        mean_beta: t.beta.iter().sum::<f64>() / t.beta.len().max(1) as f64,
    })
}

fn generate_records(model: &Model, dataset: &Dataset, mode: GenMode) -> Vec<GenerationRecord> {
    let mut out = Vec::new();
    for (i, art) in dataset.articles.iter().enumerate() {
        let gs = gates_summary(model, &art.title, &art.body);
        match mode {
            GenMode::Single => {
                let g = infer::generate_single(model, &art.title, &art.body);
                out.push(GenerationRecord {
                    article_id: i,
                    topic_id: g.topic,
                    comment: g.text,
                    score: g.score,
                    gates_summary: gs,
                });
            }
            GenMode::Diverse => {
                for g in
                    infer::generate_diverse(model, &art.title, &art.body, model.cfg.n_diverse)
                {
                    out.push(GenerationRecord {
                        article_id: i,
                        topic_id: g.topic,
                        comment: g.text,
                        score: g.score,
                        gates_summary: gs.as_ref().map(|s| GatesSummary {
                            kept: s.kept,
                            total: s.total,
                            mean_beta: s.mean_beta,
                        }),
                    });
                }
            }
        }
    }
    out
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let model = load_model(&a.checkpoint, &a.overrides)?;
    let raw: Vec<RawArticle> = read_jsonl(&a.data)?;
    let dataset = encode_all(&raw, &model);
    let records = generate_records(&model, &dataset, a.mode);
    let gen_path = a.out.join("generations.jsonl");
    write_jsonl(&gen_path, &records)?;
    let cfg_path = echo_config(&model.cfg, &a.out)?;
    let mut m = Manifest::new("generate", Some(model.cfg.seed));
    m.input("checkpoint", &a.checkpoint)?;
    m.input("data", &a.data)?;
    m.output("generations", &gen_path)?;
    m.output("config.resolved", &cfg_path)?;
    m.write(&a.out)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let raw: Vec<RawArticle> = read_jsonl(&a.data)?;
    let lowercase = !a.no_lowercase;
    let tok = |s: &str| metrics::tokenize(s, lowercase);
    let refs: Vec<Vec<Vec<String>>> = raw
        .iter()
        .map(|r| r.comments.iter().map(|c| tok(c)).collect())
        .collect();

    // Hypotheses per article: the first is the quality hypothesis, the
    // whole group feeds M-Distinct when any article has several.
    let (by_article, cider_d, echoed): (Vec<Vec<Vec<String>>>, bool, Option<(Config, u64)>) =
        if let Some(ck) = &a.checkpoint {
            let model = load_model(ck, &a.overrides)?;
            let dataset = encode_all(&raw, &model);
            let singles = generate_records(&model, &dataset, GenMode::Single);
            let diverse = generate_records(&model, &dataset, GenMode::Diverse);
            let mut groups: Vec<Vec<Vec<String>>> = vec![Vec::new(); raw.len()];
            for r in &singles {
                groups[r.article_id].push(tok(&r.comment));
            }
            for r in diverse {
                // Skip the rank-1 duplicate of the single hypothesis.
                if groups[r.article_id].len() == 1
                    && tok(&r.comment) == groups[r.article_id][0]
                {
                    continue;
                }
                groups[r.article_id].push(tok(&r.comment));
            }
            let seed = model.cfg.seed;
            (groups, model.cfg.cider_d, Some((model.cfg.clone(), seed)))
        } else {
            let path = a.generations.as_ref().expect("clap group enforces source");
            let lines: Vec<GenerationRecord> = read_jsonl(path)?;
            let mut groups: Vec<Vec<Vec<String>>> = vec![Vec::new(); raw.len()];
            for r in &lines {
                if r.article_id >= raw.len() {
                    return Err(Error::InvalidInput(format!(
                        "generation references article {} but data has {}",
                        r.article_id,
                        raw.len()
                    )));
                }
                groups[r.article_id].push(tok(&r.comment));
            }
            (groups, false, None)
        };

    if let Some(i) = by_article.iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "article {i} has no hypothesis to score"
        )));
    }
    let hyps: Vec<Vec<String>> = by_article.iter().map(|g| g[0].clone()).collect();
    let grouped = by_article.iter().any(|g| g.len() > 1);
    let report = metrics::evaluate(
        &hyps,
        &refs,
        grouped.then_some(by_article.as_slice()),
        cider_d,
    )?;

    let json_path = a.out.join("metrics.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    let csv_path = a.out.join("metrics.csv");
    std::fs::write(&csv_path, report.to_csv())?;

    let mut m = Manifest::new("evaluate", echoed.as_ref().map(|(_, s)| *s));
    m.input("data", &a.data)?;
    if let Some(ck) = &a.checkpoint {
        m.input("checkpoint", ck)?;
    }
    if let Some(g) = &a.generations {
        m.input("generations", g)?;
    }
    if let Some((cfg, _)) = &echoed {
        let cfg_path = echo_config(cfg, &a.out)?;
        m.output("config.resolved", &cfg_path)?;
    }
    m.output("metrics.json", &json_path)?;
    m.output("metrics.csv", &csv_path)?;
    m.write(&a.out)
}

#[derive(Debug, Serialize)]
struct TopicReport {
    purity: Option<f64>,
    topics: Vec<TopicEntry>,
}

#[derive(Debug, Serialize)]
struct TopicEntry {
    topic: usize,
    comments: usize,
    top_words: Vec<String>,
}

fn cmd_topics(a: TopicsArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let model = load_model(&a.checkpoint, &[])?;
    let raw: Vec<RawArticle> = read_jsonl(&a.data)?;
    let dataset = encode_all(&raw, &model);
    let stop = match &a.stop_words {
        Some(p) => load_stop_words(p)?,
        None => HashSet::new(),
    };
    let assignments = metrics::assign_topics(&model, &dataset).ok_or_else(|| {
        Error::InvalidInput("model was trained without the clustering module".into())
    })?;

    // Purity against gold labels when the corpus carries them.
    let gold: Option<Vec<usize>> = raw
        .iter()
        .map(|r| {
            r.topic
                .map(|t| std::iter::repeat(t).take(r.comments.len()).collect::<Vec<_>>())
        })
        .collect::<Option<Vec<_>>>()
        .map(|per_article| per_article.into_iter().flatten().collect());
    let purity = gold.map(|g| metrics::purity(&assignments, &g));

    let mut sizes = vec![0usize; model.cfg.n_topics];
    for &t in &assignments {
        sizes[t] += 1;
    }
    let topics = (0..model.cfg.n_topics)
        .map(|t| TopicEntry {
            topic: t,
            comments: sizes[t],
            top_words: metrics::topic_top_words(&model, &dataset, t, a.top_m, &stop),
        })
        .collect();
    let report = TopicReport { purity, topics };
    let path = a.out.join("topics.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    let cfg_path = echo_config(&model.cfg, &a.out)?;
    let mut m = Manifest::new("topics", Some(model.cfg.seed));
    m.input("checkpoint", &a.checkpoint)?;
    m.input("data", &a.data)?;
    m.output("topics", &path)?;
    m.output("config.resolved", &cfg_path)?;
    m.write(&a.out)
}

#[derive(Debug, Serialize)]
struct GateRecord {
    article_id: usize,
    tokens: Vec<String>,
    beta: Vec<f64>,
    gate: Vec<f64>,
    kept: usize,
    total: usize,
}

fn cmd_gates(a: GatesArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let model = load_model(&a.checkpoint, &[])?;
    let raw: Vec<RawArticle> = read_jsonl(&a.data)?;
    let dataset = encode_all(&raw, &model);
    let mut records = Vec::new();
    for (i, art) in dataset.articles.iter().enumerate() {
        let trace = infer::gate_trace(&model, &art.title, &art.body).ok_or_else(|| {
            Error::InvalidInput("model was trained without the saliency module".into())
        })?;
        records.push(GateRecord {
            article_id: i,
            tokens: art
                .body
                .iter()
                .map(|&id| model.vocab.token(id).to_string())
                .collect(),
            kept: trace.kept(),
            total: trace.hard.len(),
            beta: trace.beta,
            gate: trace.hard,
        });
    }
    let path = a.out.join("gates.jsonl");
    write_jsonl(&path, &records)?;
    let cfg_path = echo_config(&model.cfg, &a.out)?;
    let mut m = Manifest::new("gates", Some(model.cfg.seed));
    m.input("checkpoint", &a.checkpoint)?;
    m.input("data", &a.data)?;
    m.output("gates", &path)?;
    m.output("config.resolved", &cfg_path)?;
    m.write(&a.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_verb_is_a_usage_error() {
        assert_eq!(run(["chorus", "frobnicate"]), 1);
        assert_eq!(run(["chorus"]), 1);
    }

    #[test]
    fn help_exits_clean() {
        assert_eq!(run(["chorus", "--help"]), 0);
        assert_eq!(run(["chorus", "synth", "--help"]), 0);
    }

    #[test]
    fn missing_checkpoint_maps_to_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        std::fs::write(&data, "{\"title\":\"t\",\"body\":\"b\",\"comments\":[\"c\"]}\n")
            .unwrap();
        let code = run([
            "chorus",
            "generate",
            "--checkpoint",
            "/nonexistent/model.ckpt",
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn malformed_jsonl_maps_to_exit_3() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("bad.jsonl");
        std::fs::write(
            &data,
            "{\"title\":\"t\",\"body\":\"b\",\"comments\":[\"c\"]}\nnot json\n",
        )
        .unwrap();
        let code = run([
            "chorus",
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, 3);
    }

    #[test]
    fn evaluate_requires_exactly_one_source() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        std::fs::write(&data, "{\"title\":\"t\",\"body\":\"b\",\"comments\":[\"c\"]}\n")
            .unwrap();
        let code = run([
            "chorus",
            "evaluate",
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }
}
