//! `stackamr`: one binary for the whole pipeline.

use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use stackamr_core::align::{merge_alignments_with_report, read_isi_file, read_jamr_alignments, write_jamr_alignments};
use stackamr_core::metrics::{metric_counts, Metric, MetricCounts};
use stackamr_core::oracle::{oracle, oracle_report};
use stackamr_core::preprocess::{
    jackknife_tags, pool_vectors, read_linker_output, read_tag_file, read_vectors, strip_wiki, train_linear_tagger,
    wikify, write_tag_file, TaggerConfig, WikiDictionary,
};
use stackamr_core::synth::{drop_alignments, split_alignments, synth_corpus};
use stackamr_core::transition::format_transitions;
use stackamr_core::{read_corpus, write_corpus, AmrEntry};
use stackamr_parser::config::Config;
use stackamr_parser::decode::beam_search;
use stackamr_parser::model::Model;
use stackamr_parser::train::{train_best_of_seeds, train_rl, EpochStats, TrainError};
use stackamr_parser::{Example, Objective, SentenceInput};

#[derive(Parser)]
#[command(name = "stackamr", version, about = "Transition-based AMR parsing toolkit")]
struct Cli {
    /// Worker threads for sentence-level parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// TOML file with [model] and [train] tables; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge ISI and JAMR alignments into `# ::alignments` metadata.
    AlignMerge(AlignMergeArgs),
    /// Write oracle transition sequences and report the reachable Smatch.
    Oracle(OracleArgs),
    /// Train a parser (MLE, Smatch-weighted MLE or self-critical RL).
    Train(TrainArgs),
    /// Parse tokenized sentences into PENMAN.
    Parse(ParseArgs),
    /// Score predicted graphs against gold graphs.
    Score(ScoreArgs),
    /// Add `:wiki` links to named entities.
    Wikify(WikifyArgs),
    /// Build a name-to-link dictionary from a training corpus.
    WikiDict(WikiDictArgs),
    /// Train a linear tagger on contextual vectors, with jackknifing.
    Tag(TagArgs),
    /// Write a synthetic aligned corpus for experiments and smoke tests.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AlignMergeArgs {
    /// Corpus with `# ::tok` metadata.
    #[arg(long)]
    amr: PathBuf,
    /// ISI alignments, one line per graph (`token-path` items).
    #[arg(long)]
    isi: PathBuf,
    /// JAMR alignments, one line per graph (`start-end|path+path` items).
    #[arg(long)]
    jamr: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Aligned corpus (as written by `align-merge`).
    #[arg(long)]
    amr: PathBuf,
    /// Transition sequences, one line per sentence.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Aligned training corpus.
    #[arg(long)]
    train: PathBuf,
    /// Aligned dev corpus for model selection (training set if absent).
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Where to write the checkpoint.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value = "mle")]
    objective: Objective,
    /// Checkpoint to start from (required for `rl`).
    #[arg(long)]
    init: Option<PathBuf>,
    /// Train this many seeds (seed, seed+1, ...) and keep the best on dev.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    epochs: Option<usize>,
    /// Beam width for dev scoring after each epoch.
    #[arg(long)]
    beam: Option<usize>,
    /// Probability of flattened sampling per RL decode.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sentences per update.
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Per-epoch CSV log (stdout if absent).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Tag channel for the training corpus, NAME=FILE; repeatable.
    #[arg(long = "train-tags", value_parser = parse_channel)]
    train_tags: Vec<(String, PathBuf)>,
    /// Tag channel for the dev corpus, NAME=FILE; repeatable.
    #[arg(long = "dev-tags", value_parser = parse_channel)]
    dev_tags: Vec<(String, PathBuf)>,
    /// Contextual vectors for the training corpus.
    #[arg(long = "train-vectors")]
    train_vectors: Option<PathBuf>,
    #[arg(long = "dev-vectors")]
    dev_vectors: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    /// One tokenized sentence per line.
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    beam: usize,
    /// Tag channel, NAME=FILE; repeatable.
    #[arg(long, value_parser = parse_channel)]
    tags: Vec<(String, PathBuf)>,
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    gold: PathBuf,
    pred: PathBuf,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
}

#[derive(Args)]
struct WikifyArgs {
    input: PathBuf,
    /// Dictionary from `wiki-dict`.
    #[arg(long)]
    dict: PathBuf,
    /// Entity linker output, `name<TAB>link` lines.
    #[arg(long)]
    linker: Option<PathBuf>,
    /// Drop existing `:wiki` attributes first.
    #[arg(long)]
    strip: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct WikiDictArgs {
    corpus: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct TagArgs {
    /// Contextual vectors of the training sentences.
    #[arg(long = "train-vectors")]
    train_vectors: PathBuf,
    /// Gold tags of the training sentences.
    #[arg(long = "train-tags")]
    train_tags: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Jackknifed tags for the training sentences.
    #[arg(long = "out-train")]
    out_train: PathBuf,
    /// Vectors of sentences to tag with a model trained on all of the data.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(short, long, requires = "vectors")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    sentences: usize,
    /// Fraction of nodes to leave unaligned.
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    /// Share of nodes the ISI file aligns.
    #[arg(long = "sem-share", default_value_t = 0.6)]
    sem_share: f64,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

fn parse_channel(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=FILE, got `{s}`"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=FILE, got `{s}`"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))
}

/// Writes through a temporary file in the same directory and renames it.
fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("{}: cannot write", path.display()))?;
    tmp.write_all(data)?;
    tmp.persist(path).with_context(|| format!("{}: cannot write", path.display()))?;
    Ok(())
}

fn load_corpus(path: &Path) -> Result<Vec<AmrEntry>> {
    read_corpus(&read(path)?).map_err(|e| anyhow!("{}:{}: {}", path.display(), e.line, e.source))
}

fn load_model(path: &Path) -> Result<Model> {
    let f = fs::File::open(path).with_context(|| format!("{}: cannot read", path.display()))?;
    Model::load(BufReader::new(f)).with_context(|| format!("{}: bad checkpoint", path.display()))
}

fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    write_atomic(path, &buf)
}

fn load_config(file: Option<&Path>, base: Config) -> Result<Config> {
    let Some(path) = file else { return Ok(base) };
    let mut merged: toml::Table = toml::from_str(&base.to_toml()).expect("config round-trips");
    let over: toml::Table = toml::from_str(&read(path)?).with_context(|| format!("{}: bad config", path.display()))?;
    fn merge(into: &mut toml::Table, from: toml::Table) {
        for (k, v) in from {
            match (into.get_mut(&k), v) {
                (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
                (_, v) => {
                    into.insert(k, v);
                }
            }
        }
    }
    merge(&mut merged, over);
    Config::deserialize(toml::Value::Table(merged)).with_context(|| format!("{}: bad config", path.display()))
}

fn lines_of(path: &Path, n: usize) -> Result<Vec<String>> {
    let text = read(path)?;
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    if lines.len() > n {
        bail!("{}:{}: more lines than graphs ({n})", path.display(), n + 1);
    }
    Ok((0..n).map(|i| lines.get(i).cloned().unwrap_or_default()).collect())
}

fn align_merge(a: &AlignMergeArgs) -> Result<()> {
    let mut corpus = load_corpus(&a.amr)?;
    let graphs: Vec<_> = corpus.iter().map(|e| &e.graph).collect();
    let sem = read_isi_file(&read(&a.isi)?, &graphs).map_err(|e| anyhow!("{}:{}: {}", a.isi.display(), e.line, e.source))?;
    let jamr_lines = lines_of(&a.jamr, corpus.len())?;
    let mut totals = [0usize; 4];
    for (i, entry) in corpus.iter_mut().enumerate() {
        let jamr = read_jamr_alignments(&jamr_lines[i], &entry.graph)
            .map_err(|e| anyhow!("{}:{}: {}", a.jamr.display(), i + 1, e))?;
        let (merged, report) = merge_alignments_with_report(&entry.graph, &sem[i], &jamr)
            .map_err(|e| anyhow!("{}: graph {}: {}", a.amr.display(), i + 1, e))?;
        for (t, v) in totals.iter_mut().zip([
            report.after_sem,
            report.after_percolation,
            report.after_jamr,
            report.after_second_percolation,
        ]) {
            *t += v;
        }
        entry.set_meta("alignments", &write_jamr_alignments(&merged, &entry.graph));
    }
    write_atomic(&a.output, write_corpus(&corpus).as_bytes())?;
    let total: usize = corpus.iter().map(|e| e.graph.len()).sum();
    eprintln!(
        "aligned nodes of {total}: sem {} percolation {} jamr {} percolation {}",
        totals[0], totals[1], totals[2], totals[3]
    );
    Ok(())
}

fn examples_from(path: &Path) -> Result<Vec<Example>> {
    load_corpus(path)?
        .iter()
        .enumerate()
        .map(|(i, e)| Example::from_entry(e).map_err(|err| anyhow!("{}: graph {}: {}", path.display(), i + 1, err)))
        .collect()
}

fn run_oracle(a: &OracleArgs) -> Result<()> {
    let corpus = load_corpus(&a.amr)?;
    let mut outputs = Vec::new();
    for (i, e) in corpus.iter().enumerate() {
        let align = read_jamr_alignments(e.meta("alignments").unwrap_or(""), &e.graph)
            .map_err(|err| anyhow!("{}: graph {}: {}", a.amr.display(), i + 1, err))?;
        outputs.push(oracle(&e.tokens(), &e.graph, &align)?);
    }
    if let Some(out) = &a.output {
        let text: String = outputs.iter().map(|o| format_transitions(&o.transitions) + "\n").collect();
        write_atomic(out, text.as_bytes())?;
    }
    let golds: Vec<_> = corpus.iter().map(|e| &e.graph).collect();
    let r = oracle_report(&outputs, &golds, a.restarts);
    println!("sentences\t{}", r.sentences);
    println!("upper_bound\t{:.4}", r.upper_bound);
    println!("mean_sentence_f1\t{:.4}", r.mean_f1);
    println!("dropped_nodes\t{}", r.dropped_nodes);
    println!("unbuilt_arcs\t{}", r.unbuilt_arcs);
    Ok(())
}

fn attach_features(
    inputs: &mut [&mut SentenceInput],
    channels: &[(String, PathBuf)],
    vectors: Option<&Path>,
    expected: &[String],
) -> Result<Option<usize>> {
    for input in inputs.iter_mut() {
        input.tags = vec![Vec::new(); expected.len()];
    }
    for (name, path) in channels {
        let Some(ch) = expected.iter().position(|c| c == name) else {
            bail!("tag channel `{name}` is not one of the model's channels {expected:?}");
        };
        let sentences = read_tag_file(&read(path)?).map_err(|e| anyhow!("{}:{}: {}", path.display(), e.line, e))?;
        if sentences.len() != inputs.len() {
            bail!("{}: {} sentences, expected {}", path.display(), sentences.len(), inputs.len());
        }
        for (input, s) in inputs.iter_mut().zip(sentences) {
            input.tags[ch] = s.into_iter().map(|(_, t)| t).collect();
        }
    }
    let Some(path) = vectors else { return Ok(None) };
    let all = read_vectors(&read(path)?).map_err(|e| anyhow!("{}: {}", path.display(), e))?;
    if all.len() != inputs.len() {
        bail!("{}: {} sentences, expected {}", path.display(), all.len(), inputs.len());
    }
    let mut width = None;
    for (i, (input, sv)) in inputs.iter_mut().zip(&all).enumerate() {
        let pooled = pool_vectors(sv).map_err(|e| anyhow!("{}: sentence {}: {}", path.display(), i + 1, e))?;
        width = width.or(pooled.first().map(Vec::len));
        input.contextual = Some(pooled);
    }
    Ok(width)
}

fn run_train(a: &TrainArgs, cli: &Cli) -> Result<()> {
    let mut train_set = examples_from(&a.train)?;
    let mut dev = match &a.dev {
        Some(p) => examples_from(p)?,
        None => Vec::new(),
    };
    let mut base = Config::default();
    base.train.objective = a.objective;
    base.train.seed = cli.seed;
    if let Some(v) = a.epochs {
        base.train.epochs = v;
    }
    if let Some(v) = a.beam {
        base.train.eval_beam = v;
    }
    if let Some(v) = a.epsilon {
        base.train.epsilon = v;
    }
    if let Some(v) = a.batch {
        base.train.batch_size = v;
        base.train.rl_batch_size = v;
    }
    if let Some(v) = a.lr {
        base.train.learning_rate = v;
        base.train.rl_learning_rate = v;
    }
    base.model.tag_channels = a.train_tags.iter().map(|(n, _)| n.clone()).collect();
    let mut config = load_config(cli.config.as_deref(), base)?;

    let init = match &a.init {
        Some(p) => Some(load_model(p)?),
        None => None,
    };
    if let Some(m) = &init {
        config.model = m.config.clone();
    } else if config.train.objective == Objective::Rl {
        return Err(TrainError::MissingInit.into());
    }
    let channels = config.model.tag_channels.clone();
    let mut ins: Vec<&mut SentenceInput> = train_set.iter_mut().map(|e| &mut e.input).collect();
    let width = attach_features(&mut ins, &a.train_tags, a.train_vectors.as_deref(), &channels)?;
    if init.is_none() {
        config.model.contextual_dim = width;
    }
    let mut ins: Vec<&mut SentenceInput> = dev.iter_mut().map(|e| &mut e.input).collect();
    attach_features(&mut ins, &a.dev_tags, a.dev_vectors.as_deref(), &channels)?;

    let mut log_rows = vec![EpochStats::CSV_HEADER.to_string()];
    let to_stdout = a.log.is_none();
    if to_stdout {
        println!("{}", EpochStats::CSV_HEADER);
    }
    let mut log = |s: &EpochStats| {
        if to_stdout {
            println!("{}", s.to_csv());
        }
        log_rows.push(s.to_csv());
    };
    let seeds: Vec<u64> = (0..a.seeds.max(1)).map(|k| config.train.seed + k).collect();
    let model = match config.train.objective {
        Objective::Rl => {
            let init = init.ok_or(TrainError::MissingInit)?;
            let mut best: Option<(f64, Model)> = None;
            for &seed in &seeds {
                let cfg = stackamr_parser::TrainConfig { seed, ..config.train.clone() };
                let (m, r) = train_rl(Some(init.clone()), &train_set, &dev, &cfg, &mut log)?;
                if best.as_ref().is_none_or(|(b, _)| r.best_dev > *b) {
                    best = Some((r.best_dev, m));
                }
            }
            best.expect("at least one seed").1
        }
        _ if init.is_some() => {
            let mut best: Option<(f64, Model)> = None;
            for &seed in &seeds {
                let mut m = init.clone().expect("checked");
                let cfg = stackamr_parser::TrainConfig { seed, ..config.train.clone() };
                let r = stackamr_parser::train(&mut m, &train_set, &dev, &cfg, &mut log)?;
                if best.as_ref().is_none_or(|(b, _)| r.best_dev > *b) {
                    best = Some((r.best_dev, m));
                }
            }
            best.expect("at least one seed").1
        }
        _ => train_best_of_seeds(&config, &train_set, &dev, &seeds, &mut log)?.0,
    };
    save_model(&model, &a.output)?;
    if let Some(p) = &a.log {
        write_atomic(p, (log_rows.join("\n") + "\n").as_bytes())?;
    }
    Ok(())
}

fn run_parse(a: &ParseArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let text = read(&a.input)?;
    let mut inputs: Vec<SentenceInput> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| SentenceInput::new(l.split_whitespace().map(str::to_string).collect()))
        .collect();
    let channels = model.config.tag_channels.clone();
    let mut refs: Vec<&mut SentenceInput> = inputs.iter_mut().collect();
    attach_features(&mut refs, &a.tags, a.vectors.as_deref(), &channels)?;
    use rayon::prelude::*;
    let parsed = inputs
        .par_iter()
        .map(|input| beam_search(&model, input, a.beam))
        .collect::<Result<Vec<_>, _>>()?;
    let entries: Vec<AmrEntry> = inputs
        .iter()
        .zip(parsed)
        .enumerate()
        .map(|(i, (input, d))| {
            let mut e = AmrEntry::new(d.graph);
            e.set_meta("id", &(i + 1).to_string());
            e.set_meta("snt", &input.tokens.join(" "));
            e.set_meta("tok", &input.tokens.join(" "));
            e
        })
        .collect();
    let out = write_corpus(&entries);
    match &a.output {
        Some(p) => write_atomic(p, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn run_score(a: &ScoreArgs, seed: u64) -> Result<()> {
    let gold = load_corpus(&a.gold)?;
    let pred = load_corpus(&a.pred)?;
    if gold.len() != pred.len() {
        bail!("{} has {} graphs but {} has {}", a.gold.display(), gold.len(), a.pred.display(), pred.len());
    }
    use rayon::prelude::*;
    let per: Vec<MetricCounts> =
        gold.par_iter().zip(&pred).map(|(g, p)| metric_counts(&p.graph, &g.graph, a.restarts, seed)).collect();
    let mut total = MetricCounts::default();
    for c in per {
        total += c;
    }
    let suite = total.suite();
    println!("{}", Metric::ALL.map(Metric::name).join("\t"));
    println!("{}", Metric::ALL.map(|m| format!("{:.4}", suite.get(m))).join("\t"));
    Ok(())
}

fn run_wikify(a: &WikifyArgs) -> Result<()> {
    let dict = WikiDictionary::from_text(&read(&a.dict)?).map_err(|l| anyhow!("{}:{l}: bad dictionary line", a.dict.display()))?;
    let linker: Option<HashMap<String, String>> = match &a.linker {
        Some(p) => Some(read_linker_output(&read(p)?).map_err(|l| anyhow!("{}:{l}: bad linker line", p.display()))?),
        None => None,
    };
    let mut corpus = load_corpus(&a.input)?;
    for e in &mut corpus {
        let g = if a.strip { strip_wiki(&e.graph) } else { e.graph.clone() };
        e.set_graph(wikify(&g, &dict, linker.as_ref()));
    }
    write_atomic(&a.output, write_corpus(&corpus).as_bytes())
}

fn run_wiki_dict(a: &WikiDictArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let dict = WikiDictionary::from_graphs(corpus.iter().map(|e| &e.graph));
    write_atomic(&a.output, dict.to_text().as_bytes())
}

fn run_tag(a: &TagArgs) -> Result<()> {
    let vectors = read_vectors(&read(&a.train_vectors)?).map_err(|e| anyhow!("{}: {}", a.train_vectors.display(), e))?;
    let gold = read_tag_file(&read(&a.train_tags)?).map_err(|e| anyhow!("{}:{}: {}", a.train_tags.display(), e.line, e))?;
    if vectors.len() != gold.len() {
        bail!("{} sentences of vectors but {} of tags", vectors.len(), gold.len());
    }
    let mut corpus = Vec::new();
    for (i, (sv, tags)) in vectors.iter().zip(&gold).enumerate() {
        let pooled = pool_vectors(sv).map_err(|e| anyhow!("{}: sentence {}: {}", a.train_vectors.display(), i + 1, e))?;
        if pooled.len() != tags.len() {
            bail!("sentence {}: {} words of vectors but {} tags", i + 1, pooled.len(), tags.len());
        }
        corpus.push(pooled.into_iter().zip(tags.iter().map(|(_, t)| t.clone())).collect::<Vec<_>>());
    }
    let cfg = TaggerConfig::default();
    let jack = jackknife_tags(&corpus, a.folds, &cfg)?;
    let out: Vec<Vec<(String, String)>> =
        gold.iter().zip(jack).map(|(g, t)| g.iter().map(|(w, _)| w.clone()).zip(t).collect()).collect();
    write_atomic(&a.out_train, write_tag_file(&out).as_bytes())?;

    if let (Some(vp), Some(op)) = (&a.vectors, &a.output) {
        let all: Vec<_> = corpus.into_iter().flatten().collect();
        let tagger = train_linear_tagger(&all, &cfg)?;
        let test = read_vectors(&read(vp)?).map_err(|e| anyhow!("{}: {}", vp.display(), e))?;
        let mut out = Vec::new();
        for (i, sv) in test.iter().enumerate() {
            let pooled = pool_vectors(sv).map_err(|e| anyhow!("{}: sentence {}: {}", vp.display(), i + 1, e))?;
            let tags = tagger.tag(&pooled)?;
            let words = word_strings(sv);
            out.push(words.into_iter().zip(tags).collect());
        }
        write_atomic(op, write_tag_file(&out).as_bytes())?;
    }
    Ok(())
}

/// Surface words of a vector file sentence, rebuilt from its pieces.
fn word_strings(sv: &stackamr_core::preprocess::SentenceVectors) -> Vec<String> {
    sv.word_spans.iter().map(|&(s, e)| sv.pieces[s..=e].concat()).collect()
}

fn run_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    fs::create_dir_all(&a.out_dir).with_context(|| format!("{}: cannot create", a.out_dir.display()))?;
    let mut corpus = synth_corpus(a.sentences, seed);
    if a.drop > 0.0 {
        drop_alignments(&mut corpus, a.drop, seed);
    }
    let entries: Vec<AmrEntry> = corpus.iter().enumerate().map(|(i, s)| s.to_entry(&format!("synth.{}", i + 1))).collect();
    let split = split_alignments(&corpus, a.sem_share, seed);
    let mut plain = entries.clone();
    for e in &mut plain {
        e.metadata.retain(|(k, _)| k != "alignments");
    }
    let text: String = corpus.iter().map(|s| s.tokens.join(" ") + "\n").collect();
    let isi: String = split.iter().map(|(i, _)| i.clone() + "\n").collect();
    let jamr: String = split.iter().map(|(_, j)| j.clone() + "\n").collect();
    let d = &a.out_dir;
    write_atomic(&d.join("gold.amr"), write_corpus(&entries).as_bytes())?;
    write_atomic(&d.join("unaligned.amr"), write_corpus(&plain).as_bytes())?;
    write_atomic(&d.join("isi.txt"), isi.as_bytes())?;
    write_atomic(&d.join("jamr.txt"), jamr.as_bytes())?;
    write_atomic(&d.join("text.txt"), text.as_bytes())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global().ok();
    match &cli.command {
        Command::AlignMerge(a) => align_merge(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Train(a) => run_train(a, cli),
        Command::Parse(a) => run_parse(a),
        Command::Score(a) => run_score(a, cli.seed),
        Command::Wikify(a) => run_wikify(a),
        Command::WikiDict(a) => run_wiki_dict(a),
        Command::Tag(a) => run_tag(a),
        Command::Synth(a) => run_synth(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
