//! The `ontolearn` command line.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use ontolearn_core::corpus::Verbatim;
use ontolearn_core::evaluate::{split_dataset, Ablation, AblationSplit};
use ontolearn_core::features::Featurizer;
use ontolearn_core::lexicon::{ConceptType, Lexicons};
use ontolearn_core::pipeline::{
    build_pool, build_training_set, frequent_unlabeled, span_key, ActiveLearner, FeatureBuilder, Label, LabelMap,
    LabelSource, LabeledSample, Query, SampleSource, TrainingSet,
};
use ontolearn_core::pos::{BaselineTagger, TagProvider};
use ontolearn_core::rng::derive_seed;

use crate::bundle::Bundle;
use crate::config::RunConfig;
use crate::formats;
use crate::io::{read_text, write_atomic};
use crate::synth::{self, NoiseRates, SynthSpec};
use crate::workflow;

#[derive(Debug, Parser)]
#[command(name = "ontolearn", version, about = "Learn concept collocates and their types from noisy short texts")]
pub struct Cli {
    /// Base random seed; every stochastic step derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 makes every step run sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override, `key=value`; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Concept types, comma separated.
    #[arg(long, global = true)]
    types: Option<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LexArgs {
    /// Directory with dictionary.txt, seed_ontology.tsv and the optional lists.
    #[arg(long)]
    lexicons: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Repair spelling, run-on words, split words and abbreviations.
    Normalize {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lex: LexArgs,
        /// Embeddings for ranking corrections; trained on the input if absent.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Correction log, `<id>\t<step>\t<before>\t<after>`.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Term and document frequencies of the input.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Train skip-gram embeddings.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weakly label collocates with the seed ontology.
    Trainset {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lex: LexArgs,
        #[arg(long)]
        out: PathBuf,
        /// Manually labeled occurrences to add.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Write frequent phrases outside the ontology here for labeling.
        #[arg(long)]
        requests: Option<PathBuf>,
    },
    /// Train the two-stage model.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lex: LexArgs,
        #[arg(long)]
        trainset: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Part-of-speech tags; the built-in tagger is used if absent.
        #[arg(long)]
        tags: Option<PathBuf>,
        /// Output model directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract concepts from a corpus.
    Infer {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lex: LexArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tags: Option<PathBuf>,
        /// The corpus is already normalized.
        #[arg(long)]
        normalized: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow the training set by query-by-committee.
    ActiveLearn {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lex: LexArgs,
        #[arg(long)]
        trainset: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        tags: Option<PathBuf>,
        /// Answer queries from this label file instead of prompting.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Where unanswered queries are written in file mode.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Consider at most this many unlabeled candidates per length.
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score extractions against gold spans.
    Eval {
        #[arg(long)]
        extractions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Held-out phrases, one per line, to report recovery for.
        #[arg(long)]
        holdout: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature-family ablation.
    Importance {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lex: LexArgs,
        #[arg(long)]
        trainset: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        tags: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::DropOne)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with gold annotations and lexicons.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        size: usize,
        #[arg(long)]
        concepts: Option<usize>,
        #[arg(long)]
        holdout: Option<f64>,
        /// Rate used for all four kinds of noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        abbreviations: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    DropOne,
    Backward,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_text(&read_text(path)?, &path.display().to_string())?;
    }
    cfg.apply_overrides(&cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = &cli.types {
        cfg.types = formats::parse_types(t)?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    pool.install(|| dispatch(cli.command, &mut cfg))
}

fn lexicons(args: &LexArgs, cfg: &RunConfig) -> Result<Lexicons> {
    formats::load_lexicons(&args.lexicons, cfg.types.clone())
}

fn tagger(path: &Option<PathBuf>) -> Result<Box<dyn TagProvider>> {
    Ok(match path {
        Some(p) => Box::new(formats::parse_tags(&read_text(p)?, &p.display().to_string())?),
        None => Box::new(BaselineTagger::default()),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_trainset(path: &Path, cfg: &RunConfig) -> Result<TrainingSet> {
    formats::parse_trainset(&read_text(path)?, &path.display().to_string(), &cfg.types)
}

fn dispatch(command: Command, cfg: &mut RunConfig) -> Result<()> {
    match command {
        Command::Normalize { corpus, lex, embeddings, out, log, stats } => {
            let lex = lexicons(&lex, cfg)?;
            let raw = formats::load_corpus(&corpus)?;
            let emb = match embeddings {
                Some(p) => formats::load_embeddings(&p)?,
                None => workflow::raw_embeddings(&raw, cfg)?,
            };
            let norm = workflow::normalize(&raw, &lex, &emb);
            let edits: usize = norm.logs.iter().map(Vec::len).sum();
            info!("{} verbatims normalized with {edits} edits", raw.len());
            write(&out, &formats::render_corpus(&norm.verbatims))?;
            if let Some(p) = log {
                let entries = raw.iter().map(|v| v.id.as_str()).zip(norm.logs.iter());
                write(&p, &formats::render_correction_log(entries))?;
            }
            if let Some(p) = stats {
                let s = ontolearn_core::corpus::CorpusStats::build(&raw, ontolearn_core::corpus::MAX_NGRAM);
                write(&p, &formats::render_stats(&s))?;
            }
        }
        Command::Embed { corpus, out } => {
            let corpus = formats::load_corpus(&corpus)?;
            let emb = workflow::final_embeddings(&corpus, cfg)?;
            write(&out, &formats::render_embeddings(&emb))?;
        }
        Command::Trainset { corpus, lex, out, labels, requests } => {
            let lex = lexicons(&lex, cfg)?;
            let corpus = formats::load_corpus(&corpus)?;
            let mut set = build_training_set(&corpus, &lex.ontology, &lex.stop_noise, cfg.quota, derive_seed(cfg.seed, 4));
            if let Some(p) = labels {
                let rows = formats::parse_labels(&read_text(&p)?, &p.display().to_string(), &cfg.types)?;
                let ids: BTreeMap<&str, &Verbatim> = corpus.iter().map(|v| (v.id.as_str(), v)).collect();
                for (c, label) in rows {
                    let Some(label) = label else { continue };
                    let v = ids.get(c.verbatim_id.as_str()).ok_or_else(|| anyhow!("{}: unknown verbatim {}", p.display(), c.verbatim_id))?;
                    if c.start + c.n > v.len() || v.phrase(c.start, c.n) != c.phrase {
                        bail!("{}: {:?} does not occur at {}:{}", p.display(), c.phrase, c.verbatim_id, c.start);
                    }
                    set.upsert(LabeledSample { collocate: c, label, source: SampleSource::Manual });
                }
            }
            for n in &set.omitted {
                log::warn!("no seed concepts of length {n}; length {n} is omitted");
            }
            info!("training set: {} samples", set.len());
            write(&out, &formats::render_trainset(&set))?;
            if let Some(p) = requests {
                let reqs = frequent_unlabeled(&corpus, &lex.ontology, &lex.stop_noise, cfg.min_freq);
                let mut s = String::new();
                for r in reqs {
                    let c = &r.example;
                    s.push_str(&format!("{}\t{}\t{}\t{}\t\n", c.phrase, c.verbatim_id, c.start, c.n));
                }
                write(&p, &s)?;
            }
        }
        Command::Train { corpus, lex, trainset, embeddings, tags, out } => {
            let lex = lexicons(&lex, cfg)?;
            let corpus = formats::load_corpus(&corpus)?;
            let set = load_trainset(&trainset, cfg)?;
            let emb = formats::load_embeddings(&embeddings)?;
            let tagger = tagger(&tags)?;
            let bundle = workflow::train(&corpus, &lex, emb, tagger.as_ref(), &set, cfg)?;
            bundle.save(&out)?;
            info!("model covers lengths {:?}", bundle.model.coverage());
        }
        Command::Infer { corpus, lex, model, tags, normalized, out } => {
            let lex = lexicons(&lex, cfg)?;
            let bundle = Bundle::load(&model)?;
            let mut corpus = formats::load_corpus(&corpus)?;
            if !normalized {
                corpus = workflow::normalize(&corpus, &lex, &bundle.embeddings).verbatims;
            }
            let tagger = tagger(&tags)?;
            let ex = workflow::infer(&corpus, &lex, &bundle, tagger.as_ref())?;
            info!("{} concepts among {} candidates", ex.iter().filter(|e| e.concept).count(), ex.len());
            write(&out, &formats::render_extractions(&ex))?;
        }
        Command::ActiveLearn { corpus, lex, trainset, embeddings, tags, labels, queries, rounds, pool_size, out } => {
            let lex = lexicons(&lex, cfg)?;
            let corpus = formats::load_corpus(&corpus)?;
            let set = load_trainset(&trainset, cfg)?;
            let emb = formats::load_embeddings(&embeddings)?;
            let tagger = tagger(&tags)?;
            let rounds = rounds.unwrap_or(cfg.rounds);
            let grown = match labels {
                Some(p) => {
                    let rows = formats::parse_labels(&read_text(&p)?, &p.display().to_string(), &cfg.types)?;
                    let mut source = FileLabels { map: LabelMap::default(), missing: Vec::new() };
                    for (c, l) in rows {
                        if let Some(l) = l {
                            source.map.labels.insert(span_key(&c), l);
                        }
                    }
                    let result = active_learn(&corpus, &lex, &emb, tagger.as_ref(), set, cfg, rounds, pool_size, &mut source);
                    if !source.missing.is_empty() {
                        if let Some(q) = &queries {
                            write(q, &render_queries(&source.missing))?;
                        }
                    }
                    result?
                }
                None => {
                    let stdin = std::io::stdin();
                    let mut source = PromptLabels { input: stdin.lock(), output: std::io::stderr(), types: cfg.types.clone() };
                    active_learn(&corpus, &lex, &emb, tagger.as_ref(), set, cfg, rounds, pool_size, &mut source)?
                }
            };
            write(&out, &formats::render_trainset(&grown))?;
        }
        Command::Eval { extractions, gold, holdout, out } => {
            let ex = formats::parse_extractions(&read_text(&extractions)?, &extractions.display().to_string())?;
            let gold = formats::parse_gold(&read_text(&gold)?, &gold.display().to_string())?;
            let r = workflow::evaluate(&ex, &gold)?;
            let mut text = formats::render_metrics(&r.stage1, &r.stage1_per_n, &r.stage2, &r.stage2_per_n);
            let mut summary = format!(
                "stage1 P={:.4} R={:.4} F1={:.4}\nstage2 macro P={:.4} R={:.4} F1={:.4}\n",
                r.stage1.precision, r.stage1.recall, r.stage1.f1, r.stage2.precision, r.stage2.recall, r.stage2.f1
            );
            for (n, m) in &r.stage1_per_n {
                summary.push_str(&format!("stage1 n={n} F1={:.4}\n", m.f1));
            }
            if let Some(h) = holdout {
                let list = read_text(&h)?;
                let held: std::collections::BTreeSet<&str> = list.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
                let got = workflow::recovered_holdouts(&ex, &gold, &held);
                summary.push_str(&format!("held-out phrases recovered: {} of {}\n", got.len(), held.len()));
                text.push_str(&format!("#holdout_recovered\t{}\t{}\n", got.len(), held.len()));
            }
            write(&out, &text)?;
            // a closed pipe on stdout is not an error worth reporting
            let _ = std::io::stdout().lock().write_all(summary.as_bytes());
        }
        Command::Importance { corpus, lex, trainset, embeddings, tags, mode, out } => {
            let lex = lexicons(&lex, cfg)?;
            let corpus = formats::load_corpus(&corpus)?;
            let set = load_trainset(&trainset, cfg)?;
            let emb = formats::load_embeddings(&embeddings)?;
            let tagger = tagger(&tags)?;
            let poly = workflow::fit_polysemy(&corpus, &emb, &lex, cfg);
            let featurizer = Featurizer { embeddings: &emb, polysemy: &poly, ontology: &lex.ontology };
            let data = workflow::datasets(&corpus, featurizer, tagger.as_ref(), &set, cfg)?;
            let splits: BTreeMap<usize, AblationSplit> = data
                .iter()
                .map(|(n, ds)| (*n, split_dataset(ds, cfg.eval_fraction, derive_seed(cfg.seed, 5 + *n as u64))))
                .filter(|(_, s)| !s.train.samples.is_empty() && !s.eval.samples.is_empty())
                .collect();
            let ablation = Ablation {
                splits: &splits,
                config: cfg.forest.clone(),
                seed: derive_seed(cfg.seed, 6),
                trainer: &crate::parallel::RayonTrainer,
            };
            let text = match mode {
                Mode::DropOne => formats::render_importance(&ablation.drop_one_importance()?),
                Mode::Backward => formats::render_elimination(&ablation.backward_elimination()?),
            };
            write(&out, &text)?;
        }
        Command::Synth { out, size, concepts, holdout, noise, abbreviations } => {
            let mut spec = SynthSpec::default();
            if let Some(c) = concepts {
                spec.n_concepts = c;
            }
            if let Some(h) = holdout {
                spec.holdout = h;
            }
            if let Some(r) = noise {
                spec.noise = NoiseRates::uniform(r);
            }
            if let Some(a) = abbreviations {
                spec.n_abbreviations = a;
            }
            let corpus = synth::generate(&spec, size, cfg.seed)?;
            corpus.write(&out)?;
            info!("synthetic corpus with {} verbatims written to {}", size, out.display());
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn active_learn(
    corpus: &[Verbatim],
    lex: &Lexicons,
    emb: &ontolearn_core::embeddings::EmbeddingTable,
    tagger: &dyn TagProvider,
    set: TrainingSet,
    cfg: &RunConfig,
    rounds: usize,
    pool_size: Option<usize>,
    source: &mut dyn LabelSource,
) -> Result<TrainingSet> {
    let poly = workflow::fit_polysemy(corpus, emb, lex, cfg);
    let featurizer = Featurizer { embeddings: emb, polysemy: &poly, ontology: &lex.ontology };
    let data = workflow::datasets(corpus, featurizer, tagger, &set, cfg)?;
    let schemas: BTreeMap<_, _> = data.iter().map(|(n, d)| (*n, d.schema.clone())).collect();
    let mut learner = ActiveLearner::new(data, cfg.forest.clone(), derive_seed(cfg.seed, 7), &crate::parallel::RayonTrainer)?;
    let mut builder = FeatureBuilder::new(corpus, featurizer, tagger);
    let mut pool = build_pool(corpus, &lex.stop_noise, &schemas, &learner.labeled_keys(), &mut builder)?;
    if let Some(cap) = pool_size {
        for (cs, x) in pool.per_n.values_mut() {
            if cs.len() > cap {
                cs.truncate(cap);
                let rows: Vec<usize> = (0..cap).collect();
                *x = x.select_rows(&rows);
            }
        }
    }
    let texts: BTreeMap<&str, String> = corpus.iter().map(|v| (v.id.as_str(), v.normalized_text())).collect();
    let lookup = |id: &str| texts.get(id).cloned();
    let reports = learner.run(&pool, &lookup, source, rounds)?;
    for (i, r) in reports.iter().enumerate() {
        info!("round {}: {} queried, {} added", i + 1, r.selected, r.added);
    }
    let mut out = set;
    for ds in learner.datasets.values() {
        for s in &ds.samples {
            out.upsert(s.clone());
        }
    }
    Ok(out)
}

fn render_queries(qs: &[Query]) -> String {
    let mut s = String::new();
    for q in qs {
        let c = &q.collocate;
        s.push_str(&format!("{}\t{}\t{}\t{}\t\n", c.phrase, c.verbatim_id, c.start, c.n));
    }
    s
}

/// Labels from a file; remembers the queries it had no answer for.
struct FileLabels {
    map: LabelMap,
    missing: Vec<Query>,
}

impl LabelSource for FileLabels {
    fn label(&mut self, queries: &[Query]) -> ontolearn_core::Result<Vec<Option<Label>>> {
        let out = self.map.label(queries)?;
        for (q, l) in queries.iter().zip(&out) {
            if l.is_none() {
                self.missing.push(q.clone());
            }
        }
        Ok(out)
    }
}

/// Asks on a terminal: shows the verbatim with the collocate in brackets
/// and reads `i` (irrelevant), a type number or name, or `c` (untyped
/// concept). An empty answer or end of input leaves the sample unlabeled.
pub struct PromptLabels<R, W> {
    pub input: R,
    pub output: W,
    pub types: Vec<ConceptType>,
}

impl<R: BufRead, W: Write> PromptLabels<R, W> {
    fn ask(&mut self, q: &Query) -> std::io::Result<Option<Label>> {
        let words: Vec<&str> = q.text.split(' ').filter(|w| *w != ".").collect();
        let c = &q.collocate;
        let shown: Vec<String> = words
            .iter()
            .enumerate()
            .map(|(i, w)| match (i == c.start, i + 1 == c.start + c.n) {
                (true, true) => format!("[{w}]"),
                (true, false) => format!("[{w}"),
                (false, true) => format!("{w}]"),
                _ => w.to_string(),
            })
            .collect();
        let menu: Vec<String> = self.types.iter().enumerate().map(|(i, t)| format!("{}={t}", i + 1)).collect();
        loop {
            writeln!(self.output, "\n{}: {}", c.verbatim_id, shown.join(" "))?;
            write!(self.output, "{:?}? i=irrelevant c=concept {} > ", c.phrase, menu.join(" "))?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            let answer = line.trim();
            if answer.is_empty() {
                return Ok(None);
            }
            if let Some(t) = answer.parse::<usize>().ok().and_then(|k| self.types.get(k.wrapping_sub(1))) {
                return Ok(Some(Label::Concept(Some(t.clone()))));
            }
            let parsed = match answer {
                "i" | "I" => Ok(Label::Irrelevant),
                "c" | "C" => Ok(Label::Concept(None)),
                other => Label::parse(other, &self.types),
            };
            match parsed {
                Ok(l) => return Ok(Some(l)),
                Err(_) => writeln!(self.output, "unrecognized answer {answer:?}")?,
            }
        }
    }
}

impl<R: BufRead, W: Write> LabelSource for PromptLabels<R, W> {
    fn label(&mut self, queries: &[Query]) -> ontolearn_core::Result<Vec<Option<Label>>> {
        queries
            .iter()
            .map(|q| self.ask(q).map_err(|e| ontolearn_core::Error::InvalidArgument(format!("terminal: {e}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ontolearn_core::corpus::Collocate;
    use ontolearn_core::lexicon::default_types;

    #[test]
    fn prompt_reads_answers() {
        let q = Query {
            collocate: Collocate { verbatim_id: "v".into(), start: 1, n: 2, phrase: "fuel pump".into() },
            text: "the fuel pump leaks".into(),
        };
        let mut out = Vec::new();
        let mut p = PromptLabels { input: "zz\n2\ni\n\n".as_bytes(), output: &mut out, types: default_types() };
        let got = p.label(&[q.clone(), q.clone(), q]).unwrap();
        assert_eq!(got, [Some(Label::Concept(Some(default_types()[1].clone()))), Some(Label::Irrelevant), None]);
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("the [fuel pump] leaks"), "{shown}");
        assert!(shown.contains("unrecognized"));
    }

    #[test]
    fn usage_errors() {
        assert!(run(["ontolearn", "train", "--corpus", "x"]).is_err());
        assert!(run(["ontolearn", "frobnicate"]).is_err());
        assert!(run(["ontolearn", "--threads", "0", "embed", "--corpus", "a", "--out", "b"]).is_err());
    }
}
