//! Text file formats. Every reader reports the file name and line number of
//! a malformed line; every writer produces output its reader accepts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use ontolearn_core::corpus::{Collocate, CorpusStats, Verbatim};
use ontolearn_core::embeddings::EmbeddingTable;
use ontolearn_core::evaluate::{Elimination, ImportanceReport, MacroMetrics, Metrics};
use ontolearn_core::features::PolysemyModel;
use ontolearn_core::forest::{ForestConfig, ForestModel, Mtry, Node, Tree};
use ontolearn_core::lexicon::{
    AbbreviationDict, ConceptType, Dictionary, Lexicons, SeedOntology, SenseLexicon, StopNoiseLists,
};
use ontolearn_core::normalize::CorrectionLog;
use ontolearn_core::pipeline::{Extraction, Label, LabeledSample, SampleSource, TrainingSet};
use ontolearn_core::pos::{ExternalTags, PosTag};
use ontolearn_core::Error;

use crate::io::{read_optional, read_text};

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> anyhow::Error {
    Error::Parse { source_name: source.to_string(), line, message: message.into() }.into()
}

/// Non-blank lines that are not `#` comments, numbered from 1.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn fields<'a>(line: &'a str, want: usize, source: &str, no: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != want {
        return Err(parse_err(source, no, format!("expected {want} tab-separated fields, found {}", f.len())));
    }
    Ok(f)
}

fn num<T: std::str::FromStr>(s: &str, what: &str, source: &str, no: usize) -> Result<T> {
    s.trim().parse().map_err(|_| parse_err(source, no, format!("invalid {what} {s:?}")))
}

// ---- corpus ----

/// `<id>\t<text>` lines; a line without a tab gets the id `line-<k>`.
pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<Verbatim>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = match line.split_once('\t') {
            Some((id, body)) => (id.trim().to_string(), body),
            None => (format!("line-{}", no + 1), line),
        };
        if id.is_empty() {
            return Err(parse_err(source, no + 1, "empty verbatim id"));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_err(source, no + 1, format!("duplicate verbatim id {id}")));
        }
        out.push(Verbatim::new(id, body));
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Verbatim>> {
    parse_corpus(&read_text(path)?, &path.display().to_string())
}

/// Writes token norms, with ` .` after sentence ends, so reading the file
/// back yields the same tokens.
pub fn render_corpus(corpus: &[Verbatim]) -> String {
    let mut s = String::new();
    for v in corpus {
        let _ = writeln!(s, "{}\t{}", v.id, v.normalized_text());
    }
    s
}

pub fn render_raw_corpus<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut s = String::new();
    for (id, text) in rows {
        let _ = writeln!(s, "{id}\t{text}");
    }
    s
}

pub fn render_stats(stats: &CorpusStats) -> String {
    let mut s = String::new();
    for (p, tf) in &stats.term_freq {
        let _ = writeln!(s, "{p}\t{tf}\t{}", stats.df(p));
    }
    s
}

// ---- lexicons ----

pub const DICTIONARY_FILE: &str = "dictionary.txt";
pub const ONTOLOGY_FILE: &str = "seed_ontology.tsv";
pub const ABBREVIATIONS_FILE: &str = "abbreviations.tsv";
pub const SENSES_FILE: &str = "senses.tsv";
pub const STOP_FILE: &str = "stop_words.txt";
pub const NOISE_FILE: &str = "noise_words.txt";

pub fn parse_types(spec: &str) -> Result<Vec<ConceptType>> {
    let types = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| ConceptType::new(s).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    if types.is_empty() {
        bail!("at least one concept type is required");
    }
    Ok(types)
}

/// Loads the lexicon directory. The dictionary and seed ontology must
/// exist; the other lists default to empty.
pub fn load_lexicons(dir: &Path, types: Vec<ConceptType>) -> Result<Lexicons> {
    let path = |f: &str| dir.join(f);
    let name = |f: &str| dir.join(f).display().to_string();
    let dictionary = Dictionary::parse(&read_text(&path(DICTIONARY_FILE))?, &name(DICTIONARY_FILE))?;
    let ontology = SeedOntology::parse(&read_text(&path(ONTOLOGY_FILE))?, &name(ONTOLOGY_FILE), types)?;
    let abbreviations =
        AbbreviationDict::parse(&read_optional(&path(ABBREVIATIONS_FILE))?, &name(ABBREVIATIONS_FILE))?;
    let senses = SenseLexicon::parse(&read_optional(&path(SENSES_FILE))?, &name(SENSES_FILE))?;
    let stop_noise = StopNoiseLists::parse(
        &read_optional(&path(STOP_FILE))?,
        &name(STOP_FILE),
        &read_optional(&path(NOISE_FILE))?,
        &name(NOISE_FILE),
    )?;
    Ok(Lexicons { dictionary, ontology, abbreviations, senses, stop_noise })
}

pub fn render_word_list<'a>(words: impl IntoIterator<Item = &'a String>) -> String {
    words.into_iter().fold(String::new(), |mut s, w| {
        s.push_str(w);
        s.push('\n');
        s
    })
}

pub fn render_ontology(onto: &SeedOntology) -> String {
    let mut s = String::new();
    for (p, t) in onto.concepts() {
        let _ = writeln!(s, "{p}\t{t}");
    }
    s
}

pub fn render_abbreviations(dict: &AbbreviationDict) -> String {
    let mut s = String::new();
    for (a, forms) in &dict.expansions {
        let _ = writeln!(s, "{a}\t{}", forms.join("|"));
    }
    s
}

pub fn render_senses(lex: &SenseLexicon) -> String {
    let mut s = String::new();
    for (w, c) in &lex.sense_count {
        let _ = writeln!(s, "{w}\t{c}");
    }
    s
}

// ---- embeddings ----

/// `<vocab> <dim> [min_count]` header, then `<word> <f_1> ... <f_d>`.
pub fn render_embeddings(table: &EmbeddingTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", table.len(), table.dim(), table.min_count());
    for (w, v) in table.iter() {
        s.push_str(w);
        for x in v {
            let _ = write!(s, " {x}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_embeddings(text: &str, source: &str) -> Result<EmbeddingTable> {
    let mut it = lines(text);
    let (no, header) = it.next().ok_or_else(|| parse_err(source, 1, "missing `<vocab> <dim>` header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 2 && h.len() != 3 {
        return Err(parse_err(source, no, "header must be `<vocab> <dim> [min_count]`"));
    }
    let vocab: usize = num(h[0], "vocabulary size", source, no)?;
    let dim: usize = num(h[1], "dimension", source, no)?;
    let min_count: u64 = match h.get(2) {
        Some(m) => num(m, "min_count", source, no)?,
        None => 0,
    };
    let mut table = EmbeddingTable::new(dim, min_count);
    for (no, line) in it {
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let v = parts.map(|x| num::<f32>(x, "float", source, no)).collect::<Result<Vec<f32>>>()?;
        if v.len() != dim {
            return Err(parse_err(source, no, format!("expected {dim} values, found {}", v.len())));
        }
        table.insert(word, v)?;
    }
    if table.len() != vocab {
        return Err(parse_err(source, 1, format!("header says {vocab} words, file has {}", table.len())));
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    parse_embeddings(&read_text(path)?, &path.display().to_string())
}

// ---- polysemy ----

/// `<phrase>\t<p>\t<p × 2d floats>`.
pub fn render_polysemy(model: &PolysemyModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "#sample_cap\t{}", model.sample_cap);
    for (phrase, cs) in &model.centroids {
        let _ = write!(s, "{phrase}\t{}\t", cs.len());
        let flat: Vec<String> = cs.iter().flatten().map(|x| x.to_string()).collect();
        s.push_str(&flat.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_polysemy(text: &str, source: &str) -> Result<PolysemyModel> {
    let mut model = PolysemyModel::default();
    for (no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if let Some(cap) = line.strip_prefix("#sample_cap\t") {
            model.sample_cap = num(cap, "sample cap", source, no)?;
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f = fields(line, 3, source, no)?;
        let p: usize = num(f[1], "centroid count", source, no)?;
        let vals = f[2]
            .split_whitespace()
            .map(|x| num::<f64>(x, "float", source, no))
            .collect::<Result<Vec<f64>>>()?;
        if p == 0 || vals.len() % p != 0 {
            return Err(parse_err(source, no, format!("{} values do not split into {p} centroids", vals.len())));
        }
        let cs: Vec<Vec<f64>> = vals.chunks(vals.len() / p).map(<[f64]>::to_vec).collect();
        model.centroids.insert(f[0].to_string(), cs);
    }
    Ok(model)
}

// ---- forests ----

pub const FOREST_MAGIC: &str = "ontolearn-forest v1";

fn render_config(c: &ForestConfig) -> String {
    let depth = c.max_depth.map_or("none".to_string(), |d| d.to_string());
    let mtry = match c.mtry {
        Mtry::Sqrt => "sqrt".to_string(),
        Mtry::All => "all".to_string(),
        Mtry::Fixed(k) => k.to_string(),
    };
    format!(
        "n_trees={} min_samples_split={} max_depth={depth} mtry={mtry} bootstrap={}",
        c.n_trees, c.min_samples_split, c.bootstrap
    )
}

fn parse_config(s: &str, source: &str, no: usize) -> Result<ForestConfig> {
    let mut c = ForestConfig::default();
    for kv in s.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(source, no, format!("bad config item {kv:?}")))?;
        match k {
            "n_trees" => c.n_trees = num(v, k, source, no)?,
            "min_samples_split" => c.min_samples_split = num(v, k, source, no)?,
            "max_depth" => c.max_depth = if v == "none" { None } else { Some(num(v, k, source, no)?) },
            "mtry" => {
                c.mtry = match v {
                    "sqrt" => Mtry::Sqrt,
                    "all" => Mtry::All,
                    _ => Mtry::Fixed(num(v, k, source, no)?),
                }
            }
            "bootstrap" => c.bootstrap = num(v, k, source, no)?,
            _ => return Err(parse_err(source, no, format!("unknown config key {k:?}"))),
        }
    }
    Ok(c)
}

/// Line-oriented forest format:
///
/// ```text
/// ontolearn-forest v1
/// classes<TAB>IRRELEVANT<TAB>CONCEPT
/// schema_hash<TAB><16 hex digits>
/// width<TAB><columns>
/// seed<TAB><u64>
/// config<TAB>n_trees=10 min_samples_split=2 max_depth=none mtry=sqrt bootstrap=true
/// tree<TAB><node count>
/// S<TAB><feature><TAB><threshold><TAB><left><TAB><right>
/// L<TAB><count class 0><TAB><count class 1>...
/// end
/// ```
///
/// Nodes of a tree are listed in index order, root first. A row goes left
/// when `x[feature] <= threshold`. Thresholds are printed in shortest
/// round-trip decimal form.
pub fn render_forest(f: &ForestModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FOREST_MAGIC}");
    let _ = writeln!(s, "classes\t{}", f.classes.join("\t"));
    let _ = writeln!(s, "schema_hash\t{:016x}", f.schema_hash);
    let _ = writeln!(s, "width\t{}", f.width);
    let _ = writeln!(s, "seed\t{}", f.seed);
    let _ = writeln!(s, "config\t{}", render_config(&f.config));
    for t in &f.trees {
        let _ = writeln!(s, "tree\t{}", t.nodes.len());
        for n in &t.nodes {
            match n {
                Node::Split { feature, threshold, left, right } => {
                    let _ = writeln!(s, "S\t{feature}\t{threshold}\t{left}\t{right}");
                }
                Node::Leaf { counts } => {
                    let c: Vec<String> = counts.iter().map(u32::to_string).collect();
                    let _ = writeln!(s, "L\t{}", c.join("\t"));
                }
            }
        }
    }
    s.push_str("end\n");
    s
}

pub fn parse_forest(text: &str, source: &str) -> Result<ForestModel> {
    let all: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    let mut it = all.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| parse_err(source, 0, format!("truncated before {what}")));
    let (no, magic) = next("header")?;
    if magic != FOREST_MAGIC {
        return Err(parse_err(source, no, format!("expected {FOREST_MAGIC:?}")));
    }
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (no, line) = next(key)?;
        match line.split_once('\t') {
            Some((k, v)) if k == key => Ok((no, v.to_string())),
            _ => Err(parse_err(source, no, format!("expected `{key}` line"))),
        }
    };
    let classes: Vec<String> = header("classes")?.1.split('\t').map(str::to_string).collect();
    let (no, h) = header("schema_hash")?;
    let schema_hash = u64::from_str_radix(&h, 16).map_err(|_| parse_err(source, no, "invalid schema hash"))?;
    let (no, w) = header("width")?;
    let width: usize = num(&w, "width", source, no)?;
    let (no, sd) = header("seed")?;
    let seed: u64 = num(&sd, "seed", source, no)?;
    let (no, cfg) = header("config")?;
    let config = parse_config(&cfg, source, no)?;
    let mut trees = Vec::new();
    loop {
        let (no, line) = next("end")?;
        if line == "end" {
            break;
        }
        let count: usize = match line.split_once('\t') {
            Some(("tree", c)) => num(c, "node count", source, no)?,
            _ => return Err(parse_err(source, no, "expected `tree` or `end`")),
        };
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, line) = next("node")?;
            let f: Vec<&str> = line.split('\t').collect();
            let node = match f[0] {
                "S" if f.len() == 5 => Node::Split {
                    feature: num(f[1], "feature", source, no)?,
                    threshold: num(f[2], "threshold", source, no)?,
                    left: num(f[3], "child", source, no)?,
                    right: num(f[4], "child", source, no)?,
                },
                "L" => Node::Leaf {
                    counts: f[1..].iter().map(|c| num(c, "count", source, no)).collect::<Result<_>>()?,
                },
                _ => return Err(parse_err(source, no, "malformed node")),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    Ok(ForestModel::from_parts(config, classes, schema_hash, width, seed, trees)?)
}

// ---- tags ----

/// `<verbatim_id>\t<tag_1> <tag_2> ...`, with coarse or Penn tags.
pub fn parse_tags(text: &str, source: &str) -> Result<ExternalTags> {
    let mut tags = ExternalTags::default();
    for (no, line) in lines(text) {
        let (id, rest) = line.split_once('\t').ok_or_else(|| parse_err(source, no, "expected `<id>\\t<tags>`"))?;
        tags.insert(id, rest.split_whitespace().map(PosTag::from_label).collect());
    }
    Ok(tags)
}

// ---- extractions ----

fn dash_or<T: ToString>(x: Option<T>) -> String {
    x.map_or("-".to_string(), |v| v.to_string())
}

/// `<id>\t<start>\t<n>\t<phrase>\t<CONCEPT|IRRELEVANT>\t<type|->\t<p1>\t<p2|->`.
pub fn render_extractions(ex: &[Extraction]) -> String {
    let mut s = String::new();
    for e in ex {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{}",
            e.verbatim_id,
            e.start,
            e.n,
            e.phrase,
            if e.concept { "CONCEPT" } else { "IRRELEVANT" },
            dash_or(e.concept_type.as_deref()),
            e.p_stage1,
            dash_or(e.p_stage2.map(|p| format!("{p:.4}"))),
        );
    }
    s
}

pub fn parse_extractions(text: &str, source: &str) -> Result<Vec<Extraction>> {
    let mut out = Vec::new();
    for (no, line) in lines(text) {
        let f = fields(line, 8, source, no)?;
        let concept = match f[4] {
            "CONCEPT" => true,
            "IRRELEVANT" => false,
            other => return Err(parse_err(source, no, format!("unknown decision {other:?}"))),
        };
        out.push(Extraction {
            verbatim_id: f[0].to_string(),
            start: num(f[1], "start", source, no)?,
            n: num(f[2], "length", source, no)?,
            phrase: f[3].to_string(),
            concept,
            concept_type: (f[5] != "-").then(|| f[5].to_string()),
            p_stage1: num(f[6], "probability", source, no)?,
            p_stage2: if f[7] == "-" { None } else { Some(num(f[7], "probability", source, no)?) },
        });
    }
    Ok(out)
}

// ---- labels and training sets ----

fn collocate_from(f: &[&str], source: &str, no: usize) -> Result<Collocate> {
    let n: usize = num(f[3], "length", source, no)?;
    let phrase = f[0].split_whitespace().collect::<Vec<_>>().join(" ");
    if n == 0 || phrase.split(' ').count() != n {
        return Err(parse_err(source, no, format!("phrase {:?} does not have {n} tokens", f[0])));
    }
    Ok(Collocate {
        verbatim_id: f[1].to_string(),
        start: num(f[2], "start", source, no)?,
        n,
        phrase,
    })
}

/// `<phrase>\t<verbatim_id>\t<start>\t<n>\t<label>`.
pub fn render_labels<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>) -> String {
    let mut s = String::new();
    for x in samples {
        let c = &x.collocate;
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", c.phrase, c.verbatim_id, c.start, c.n, x.label);
    }
    s
}

/// Reads a label file. An empty label field means "not labeled yet".
pub fn parse_labels(text: &str, source: &str, types: &[ConceptType]) -> Result<Vec<(Collocate, Option<Label>)>> {
    let mut out = Vec::new();
    for (no, line) in lines(text) {
        let mut f: Vec<&str> = line.split('\t').collect();
        if f.len() == 4 {
            f.push("");
        }
        if f.len() != 5 {
            return Err(parse_err(source, no, format!("expected 5 tab-separated fields, found {}", f.len())));
        }
        let c = collocate_from(&f, source, no)?;
        let label = if f[4].trim().is_empty() {
            None
        } else {
            Some(Label::parse(f[4], types).map_err(|e| parse_err(source, no, e.to_string()))?)
        };
        out.push((c, label));
    }
    Ok(out)
}

/// Label-file columns plus `<source>` (seed, manual or active).
pub fn render_trainset(set: &TrainingSet) -> String {
    let mut s = String::new();
    for x in set.iter() {
        let c = &x.collocate;
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", c.phrase, c.verbatim_id, c.start, c.n, x.label, x.source.as_str());
    }
    s
}

pub fn parse_trainset(text: &str, source: &str, types: &[ConceptType]) -> Result<TrainingSet> {
    let mut set = TrainingSet::default();
    for (no, line) in lines(text) {
        let f = fields(line, 6, source, no)?;
        let collocate = collocate_from(&f, source, no)?;
        let label = Label::parse(f[4], types).map_err(|e| parse_err(source, no, e.to_string()))?;
        let src = SampleSource::parse(f[5]).ok_or_else(|| parse_err(source, no, format!("unknown source {:?}", f[5])))?;
        set.samples.entry(collocate.n).or_default().push(LabeledSample { collocate, label, source: src });
    }
    Ok(set)
}

// ---- gold annotations ----

/// One gold concept occurrence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GoldSpan {
    pub verbatim_id: String,
    pub start: usize,
    pub n: usize,
    pub phrase: String,
    pub concept_type: String,
}

/// `<verbatim_id>\t<start>\t<n>\t<phrase>\t<type>`.
pub fn render_gold(spans: &[GoldSpan]) -> String {
    let mut s = String::new();
    for g in spans {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", g.verbatim_id, g.start, g.n, g.phrase, g.concept_type);
    }
    s
}

pub fn parse_gold(text: &str, source: &str) -> Result<Vec<GoldSpan>> {
    let mut out = Vec::new();
    for (no, line) in lines(text) {
        let f = fields(line, 5, source, no)?;
        out.push(GoldSpan {
            verbatim_id: f[0].to_string(),
            start: num(f[1], "start", source, no)?,
            n: num(f[2], "length", source, no)?,
            phrase: f[3].to_string(),
            concept_type: f[4].to_string(),
        });
    }
    Ok(out)
}

// ---- reports ----

/// `<verbatim_id>\t<step>\t<before>\t<after>`.
pub fn render_correction_log<'a>(entries: impl IntoIterator<Item = (&'a str, &'a CorrectionLog)>) -> String {
    let mut s = String::new();
    for (id, log) in entries {
        for c in log {
            let _ = writeln!(s, "{id}\t{}\t{}\t{}", c.step, c.before, c.after);
        }
    }
    s
}

pub const METRICS_HEADER: &str = "stage\tscope\ttp\tfp\tfn\tprecision\trecall\tf1";

fn metrics_row(s: &mut String, stage: &str, scope: &str, m: &Metrics) {
    let _ = writeln!(
        s,
        "{stage}\t{scope}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
        m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
    );
}

/// Overall and per-length rows for both stages, plus per-type rows.
pub fn render_metrics(
    stage1: &Metrics,
    stage1_per_n: &BTreeMap<usize, Metrics>,
    stage2: &MacroMetrics,
    stage2_per_n: &BTreeMap<usize, MacroMetrics>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{METRICS_HEADER}");
    metrics_row(&mut s, "stage1", "all", stage1);
    for (n, m) in stage1_per_n {
        metrics_row(&mut s, "stage1", &format!("n={n}"), m);
    }
    let macro_row = |s: &mut String, scope: &str, m: &MacroMetrics| {
        let _ = writeln!(s, "stage2\t{scope}\t-\t-\t-\t{:.4}\t{:.4}\t{:.4}", m.precision, m.recall, m.f1);
    };
    macro_row(&mut s, "all", stage2);
    for (n, m) in stage2_per_n {
        macro_row(&mut s, &format!("n={n}"), m);
    }
    for (t, m) in &stage2.per_class {
        metrics_row(&mut s, "stage2", &format!("type={t}"), m);
    }
    s
}

/// `<family>\t<delta_f1>`, largest first, after a `#baseline` comment.
pub fn render_importance(r: &ImportanceReport) -> String {
    let mut s = format!("#baseline_f1\t{:.6}\n", r.baseline);
    for (f, d) in &r.deltas {
        let _ = writeln!(s, "{f}\t{d:.6}");
    }
    s
}

/// One row per round: baseline, each candidate's F1 without that family,
/// and what was removed.
pub fn render_elimination(e: &Elimination) -> String {
    let mut s = String::from("round\tbaseline_f1\tcandidates\tremoved\n");
    for (i, r) in e.trace.iter().enumerate() {
        let cands: Vec<String> = r.candidates.iter().map(|(f, v)| format!("{f}={v:.6}")).collect();
        let _ = writeln!(s, "{}\t{:.6}\t{}\t{}", i + 1, r.baseline, cands.join(","), dash_or(r.removed));
    }
    let kept: Vec<&str> = e.kept.iter().map(|f| f.as_str()).collect();
    let _ = writeln!(s, "#kept\t{}\t{:.6}", kept.join(","), e.final_f1);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ontolearn_core::forest::{train_forest, Matrix};
    use ontolearn_core::lexicon::default_types;
    use ontolearn_core::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn corpus_ids_and_errors() {
        let c = parse_corpus("a\tEngine noise.\nno tab here\n\nb\tx", "c.tsv").unwrap();
        assert_eq!(c.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(), ["a", "line-2", "b"]);
        let err = parse_corpus("a\tx\na\ty", "c.tsv").unwrap_err().to_string();
        assert!(err.contains("c.tsv:2"), "{err}");
        let again = parse_corpus(&render_corpus(&c), "r").unwrap();
        for (x, y) in c.iter().zip(&again) {
            assert_eq!(x.norms().collect::<Vec<_>>(), y.norms().collect::<Vec<_>>());
            assert_eq!(x.segments(), y.segments());
        }
    }

    #[test]
    fn embeddings_round_trip() {
        let mut t = EmbeddingTable::new(3, 5);
        t.insert("a", vec![0.1, -2.5e-7, 3.0]).unwrap();
        t.insert("b", vec![1.0 / 3.0, 0.0, -1.0]).unwrap();
        let back = parse_embeddings(&render_embeddings(&t), "e").unwrap();
        assert_eq!(back.get("a"), t.get("a"));
        assert_eq!(back.get("b"), t.get("b"));
        assert!(parse_embeddings("2 3\na 1 2 3\n", "e").is_err());
        assert!(parse_embeddings("1 3\na 1 2\n", "e").unwrap_err().to_string().contains("e:2"));
    }

    #[test]
    fn polysemy_round_trip() {
        let mut m = PolysemyModel { sample_cap: 1000, ..Default::default() };
        m.centroids.insert("fuel pump".into(), vec![vec![0.5, 1.0 / 3.0], vec![-1.0, 2.0]]);
        assert_eq!(parse_polysemy(&render_polysemy(&m), "p").unwrap(), m);
    }

    #[test]
    fn forest_round_trip_is_exact() {
        let mut rng = seeded(8);
        let mut x = Matrix::new(4);
        let mut y = Vec::new();
        for _ in 0..200 {
            let r: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            y.push(usize::from(r[0] + r[1] * r[2] > 0.0));
            x.push_row(&r).unwrap();
        }
        let f = train_forest(&x, &y, vec!["n".into(), "y".into()], 42, &ForestConfig::default(), 3).unwrap();
        let text = render_forest(&f);
        let back = parse_forest(&text, "f").unwrap();
        assert_eq!(back, f);
        assert_eq!(render_forest(&back), text);
        assert!(parse_forest(&text.replace("end\n", ""), "f").is_err());
    }

    #[test]
    fn labels_and_trainset() {
        let types = default_types();
        let rows = parse_labels("fuel pump\tv1\t2\t2\tA\nnoise\tv2\t0\t1\t\nx\tv3\t0\t1\tIRRELEVANT\n", "l", &types).unwrap();
        assert_eq!(rows[0].1, Some(Label::Concept(Some(types[0].clone()))));
        assert_eq!(rows[1].1, None);
        assert!(parse_labels("fuel pump\tv1\t2\t3\tA\n", "l", &types).is_err());
        let mut set = TrainingSet::default();
        for (c, l) in rows.into_iter().filter(|r| r.1.is_some()) {
            set.upsert(LabeledSample { collocate: c, label: l.unwrap(), source: SampleSource::Manual });
        }
        let back = parse_trainset(&render_trainset(&set), "t", &types).unwrap();
        assert_eq!(back.samples, set.samples);
    }

    #[test]
    fn extractions_and_gold_round_trip() {
        let e = vec![
            Extraction {
                verbatim_id: "v".into(),
                start: 1,
                n: 2,
                phrase: "fuel pump".into(),
                concept: true,
                concept_type: Some("A".into()),
                p_stage1: 0.9,
                p_stage2: Some(0.7),
            },
            Extraction {
                verbatim_id: "v".into(),
                start: 0,
                n: 1,
                phrase: "customer".into(),
                concept: false,
                concept_type: None,
                p_stage1: 0.1,
                p_stage2: None,
            },
        ];
        assert_eq!(parse_extractions(&render_extractions(&e), "x").unwrap(), e);
        let g = vec![GoldSpan { verbatim_id: "v".into(), start: 1, n: 2, phrase: "fuel pump".into(), concept_type: "A".into() }];
        assert_eq!(parse_gold(&render_gold(&g), "g").unwrap(), g);
    }

    #[test]
    fn tags_file() {
        let t = parse_tags("v1\tNN VBD .\n", "t").unwrap();
        assert_eq!(t.tags["v1"], [PosTag::Noun, PosTag::Verb, PosTag::Punct]);
    }
}
