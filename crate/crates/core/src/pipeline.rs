//! Weak labeling from the seed ontology, per-length two-stage training,
//! inference and query-by-committee active learning.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::corpus::{spans, Collocate, CorpusStats, Verbatim, MAX_NGRAM};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{FeatureSchema, Featurizer, OccurrenceIndex, PolysemyConfig, PolysemyModel, VerbatimView};
use crate::forest::{train_forest, ForestConfig, ForestModel, Matrix};
use crate::lexicon::{ConceptType, SeedOntology, SenseLexicon, StopNoiseLists};
use crate::pos::TagProvider;
use crate::rng::{derive_seed, seeded};

pub const CONCEPT: &str = "CONCEPT";
pub const IRRELEVANT: &str = "IRRELEVANT";

/// Stage-1 class order. Ties in the forest vote go to the first entry.
pub const STAGE1_CLASSES: [&str; 2] = [IRRELEVANT, CONCEPT];

/// Index of `CONCEPT` in [`STAGE1_CLASSES`].
pub const CONCEPT_CLASS: usize = 1;

pub const COMMITTEE_SIZE: usize = 8;

pub const DEFAULT_ROUNDS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Irrelevant,
    /// A concept, with its type when known.
    Concept(Option<ConceptType>),
}

impl Label {
    pub fn is_concept(&self) -> bool {
        matches!(self, Label::Concept(_))
    }

    pub fn concept_type(&self) -> Option<&ConceptType> {
        match self {
            Label::Concept(t) => t.as_ref(),
            Label::Irrelevant => None,
        }
    }

    /// `IRRELEVANT`, `CONCEPT`, or the type label itself.
    pub fn as_str(&self) -> &str {
        match self {
            Label::Irrelevant => IRRELEVANT,
            Label::Concept(None) => CONCEPT,
            Label::Concept(Some(t)) => t.as_str(),
        }
    }

    pub fn parse(s: &str, types: &[ConceptType]) -> Result<Label> {
        let s = s.trim();
        if let Some(t) = types.iter().find(|t| t.as_str() == s) {
            return Ok(Label::Concept(Some(t.clone())));
        }
        if s.eq_ignore_ascii_case(IRRELEVANT) {
            Ok(Label::Irrelevant)
        } else if s.eq_ignore_ascii_case(CONCEPT) {
            Ok(Label::Concept(None))
        } else {
            Err(Error::InvalidArgument(format!(
                "unknown label {s:?}; expected {IRRELEVANT}, {CONCEPT} or a concept type"
            )))
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SampleSource {
    SeedOntology,
    Manual,
    ActiveLearning,
}

impl SampleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleSource::SeedOntology => "seed",
            SampleSource::Manual => "manual",
            SampleSource::ActiveLearning => "active",
        }
    }

    pub fn parse(s: &str) -> Option<SampleSource> {
        [SampleSource::SeedOntology, SampleSource::Manual, SampleSource::ActiveLearning]
            .into_iter()
            .find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub collocate: Collocate,
    pub label: Label,
    pub source: SampleSource,
}

/// Identifies one occurrence: `(verbatim id, start, n)`.
pub type SpanKey = (String, usize, usize);

pub fn span_key(c: &Collocate) -> SpanKey {
    (c.verbatim_id.clone(), c.start, c.n)
}

/// Greedy leftmost-longest matching of seed phrases (up to four tokens),
/// never crossing a sentence boundary. Matched tokens are consumed, so
/// a phrase nested in a longer match is never tagged on its own.
pub fn tag_seed_concepts(verbatim: &Verbatim, onto: &SeedOntology) -> Vec<Collocate> {
    let mut out = Vec::new();
    for seg in verbatim.segments() {
        let mut i = seg.start;
        while i < seg.end {
            let longest = (1..=MAX_NGRAM.min(seg.end - i))
                .rev()
                .find(|&n| onto.contains(&verbatim.phrase(i, n)));
            match longest {
                Some(n) => {
                    out.push(verbatim.collocate(i, n));
                    i += n;
                }
                None => i += 1,
            }
        }
    }
    out
}

fn clean_span(verbatim: &Verbatim, start: usize, n: usize, stops: &StopNoiseLists) -> bool {
    verbatim.tokens[start..start + n].iter().all(|t| !stops.excludes(&t.norm))
}

/// Spans of one to four tokens that avoid every concept span and every
/// stop or noise word.
pub fn collect_irrelevant(verbatim: &Verbatim, concepts: &[Collocate], stops: &StopNoiseLists) -> Vec<Collocate> {
    spans(&verbatim.tokens, MAX_NGRAM)
        .into_iter()
        .filter(|&(s, n)| !concepts.iter().any(|c| c.overlaps(s, n)))
        .filter(|&(s, n)| clean_span(verbatim, s, n, stops))
        .map(|(s, n)| verbatim.collocate(s, n))
        .collect()
}

/// Every span of one to four tokens free of stop and noise words.
pub fn generate_candidates(verbatim: &Verbatim, stops: &StopNoiseLists) -> Vec<Collocate> {
    spans(&verbatim.tokens, MAX_NGRAM)
        .into_iter()
        .filter(|&(s, n)| clean_span(verbatim, s, n, stops))
        .map(|(s, n)| verbatim.collocate(s, n))
        .collect()
}

/// Labeled occurrences grouped by length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingSet {
    pub samples: BTreeMap<usize, Vec<LabeledSample>>,
    /// Lengths left out because the seed ontology never matched one.
    pub omitted: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.samples.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> BTreeSet<SpanKey> {
        self.samples.values().flatten().map(|s| span_key(&s.collocate)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledSample> {
        self.samples.values().flatten()
    }

    /// Adds a sample, replacing any earlier label for the same occurrence.
    /// Returns whether the occurrence was new.
    pub fn upsert(&mut self, sample: LabeledSample) -> bool {
        let list = self.samples.entry(sample.collocate.n).or_default();
        let key = (&sample.collocate.verbatim_id, sample.collocate.start);
        match list
            .iter_mut()
            .find(|s| (&s.collocate.verbatim_id, s.collocate.start) == key)
        {
            Some(old) => {
                *old = sample;
                false
            }
            None => {
                list.push(sample);
                true
            }
        }
    }
}

fn sample_quota<T>(mut pool: Vec<(usize, T)>, quota: usize, rng: &mut crate::rng::Rng) -> Vec<(usize, T)> {
    if pool.len() > quota {
        pool.shuffle(rng);
        pool.truncate(quota);
        pool.sort_by_key(|(k, _)| *k);
    }
    pool
}

/// Per length, up to `quota` seed-tagged concepts and up to `quota`
/// irrelevant collocates, drawn uniformly without replacement.
pub fn build_training_set(
    corpus: &[Verbatim],
    onto: &SeedOntology,
    stops: &StopNoiseLists,
    quota: usize,
    seed: u64,
) -> TrainingSet {
    let mut concepts: BTreeMap<usize, Vec<(usize, Collocate)>> = BTreeMap::new();
    let mut irrelevant: BTreeMap<usize, Vec<(usize, Collocate)>> = BTreeMap::new();
    let mut order = 0usize;
    for v in corpus {
        let tagged = tag_seed_concepts(v, onto);
        for c in collect_irrelevant(v, &tagged, stops) {
            irrelevant.entry(c.n).or_default().push((order, c));
            order += 1;
        }
        for c in tagged {
            concepts.entry(c.n).or_default().push((order, c));
            order += 1;
        }
    }
    let mut set = TrainingSet::default();
    for n in 1..=MAX_NGRAM {
        let Some(pos) = concepts.remove(&n) else {
            set.omitted.push(n);
            continue;
        };
        let mut rng = seeded(derive_seed(seed, n as u64));
        let mut list: Vec<(usize, LabeledSample)> = sample_quota(pos, quota, &mut rng)
            .into_iter()
            .map(|(k, c)| {
                let ty = onto.get(&c.phrase).cloned();
                (k, LabeledSample { collocate: c, label: Label::Concept(ty), source: SampleSource::SeedOntology })
            })
            .collect();
        let neg = irrelevant.remove(&n).unwrap_or_default();
        list.extend(sample_quota(neg, quota, &mut rng).into_iter().map(|(k, c)| {
            (k, LabeledSample { collocate: c, label: Label::Irrelevant, source: SampleSource::SeedOntology })
        }));
        list.sort_by_key(|(k, _)| *k);
        set.samples.insert(n, list.into_iter().map(|(_, s)| s).collect());
    }
    set
}

/// A phrase proposed for manual labeling, with one occurrence to show.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRequest {
    pub phrase: String,
    pub freq: u64,
    pub example: Collocate,
}

/// Candidate phrases outside the seed ontology occurring at least
/// `min_freq` times, most frequent first, ties in lexicographic order.
pub fn frequent_unlabeled(
    corpus: &[Verbatim],
    onto: &SeedOntology,
    stops: &StopNoiseLists,
    min_freq: u64,
) -> Vec<LabelRequest> {
    let mut counts: BTreeMap<String, (u64, Collocate)> = BTreeMap::new();
    for v in corpus {
        for c in generate_candidates(v, stops) {
            if onto.contains(&c.phrase) {
                continue;
            }
            match counts.get_mut(&c.phrase) {
                Some(e) => e.0 += 1,
                None => {
                    counts.insert(c.phrase.clone(), (1, c));
                }
            }
        }
    }
    let mut out: Vec<LabelRequest> = counts
        .into_iter()
        .filter(|(_, (f, _))| *f >= min_freq)
        .map(|(phrase, (freq, example))| LabelRequest { phrase, freq, example })
        .collect();
    out.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.phrase.cmp(&b.phrase)));
    out
}

/// Fits polysemy centroids for every stop-free phrase seen in at least
/// `config.min_occurrences` verbatims.
pub fn fit_polysemy_model(
    corpus: &[Verbatim],
    table: &EmbeddingTable,
    senses: &SenseLexicon,
    stops: &StopNoiseLists,
    config: &PolysemyConfig,
) -> PolysemyModel {
    let index = polysemy_index(corpus, stops);
    PolysemyModel::fit_indexed(corpus, &index, table, senses, config)
}

/// Occurrences of stop-free phrases, for fitting polysemy centroids.
pub fn polysemy_index(corpus: &[Verbatim], stops: &StopNoiseLists) -> OccurrenceIndex {
    OccurrenceIndex::build(corpus, |p| p.split(' ').all(|w| !stops.excludes(w)))
}

/// Feature rows for labeled samples of one length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub x: Matrix,
    /// `samples[i]` describes row `i`.
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn empty(schema: FeatureSchema) -> Self {
        let w = schema.width();
        Dataset { schema, x: Matrix::new(w), samples: Vec::new() }
    }

    pub fn stage1_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| usize::from(s.label.is_concept())).collect()
    }

    /// Typed concept rows and their indices into `types`.
    pub fn stage2(&self, types: &[ConceptType]) -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(t) = s.label.concept_type() {
                if let Some(k) = types.iter().position(|x| x == t) {
                    rows.push(i);
                    y.push(k);
                }
            }
        }
        (self.x.select_rows(&rows), y)
    }

    pub fn push(&mut self, sample: LabeledSample, row: &[f64]) -> Result<()> {
        self.x.push_row(row)?;
        self.samples.push(sample);
        Ok(())
    }

    /// The same rows restricted to `schema`, which must be a subset of
    /// this dataset's schema.
    pub fn project(&self, schema: &FeatureSchema) -> Dataset {
        let cols = schema.columns_in(&self.schema);
        Dataset {
            schema: schema.clone(),
            x: self.x.select_columns(&cols),
            samples: self.samples.clone(),
        }
    }
}

/// Computes features for collocates, caching per-verbatim tags and seed
/// spans.
pub struct FeatureBuilder<'a> {
    corpus: &'a [Verbatim],
    ids: BTreeMap<&'a str, usize>,
    featurizer: Featurizer<'a>,
    tagger: &'a dyn TagProvider,
    views: BTreeMap<usize, VerbatimView>,
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(corpus: &'a [Verbatim], featurizer: Featurizer<'a>, tagger: &'a dyn TagProvider) -> Self {
        FeatureBuilder {
            corpus,
            ids: corpus.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect(),
            featurizer,
            tagger,
            views: BTreeMap::new(),
        }
    }

    pub fn verbatim(&self, id: &str) -> Result<&'a Verbatim> {
        self.ids
            .get(id)
            .map(|&i| &self.corpus[i])
            .ok_or_else(|| Error::UnknownVerbatim(id.to_string()))
    }

    pub fn row(&mut self, c: &Collocate, schema: &FeatureSchema, out: &mut [f64]) -> Result<()> {
        let vi = *self
            .ids
            .get(c.verbatim_id.as_str())
            .ok_or_else(|| Error::UnknownVerbatim(c.verbatim_id.clone()))?;
        let v = &self.corpus[vi];
        if c.start + c.n > v.len() || v.phrase(c.start, c.n) != c.phrase {
            return Err(Error::InvalidArgument(format!(
                "collocate {:?} at {}+{} does not match verbatim {}",
                c.phrase, c.start, c.n, c.verbatim_id
            )));
        }
        if !self.views.contains_key(&vi) {
            let view = VerbatimView::new(v, self.tagger.tag(v)?, self.featurizer.ontology)?;
            self.views.insert(vi, view);
        }
        let view = &self.views[&vi];
        self.featurizer.assemble_into(c.start, c.n, v, view, schema, out)
    }

    pub fn dataset(&mut self, samples: Vec<LabeledSample>, schema: &FeatureSchema) -> Result<Dataset> {
        let mut ds = Dataset::empty(schema.clone());
        let mut row = vec![0.0; schema.width()];
        for s in samples {
            self.row(&s.collocate, schema, &mut row)?;
            ds.push(s, &row)?;
        }
        Ok(ds)
    }

    pub fn matrix(&mut self, collocates: &[Collocate], schema: &FeatureSchema) -> Result<Matrix> {
        let mut x = Matrix::new(schema.width());
        let mut row = vec![0.0; schema.width()];
        for c in collocates {
            self.row(c, schema, &mut row)?;
            x.push_row(&row)?;
        }
        Ok(x)
    }
}

/// Trains a forest; lets callers swap in a parallel implementation.
pub trait ForestTrainer: Sync {
    fn train(
        &self,
        x: &Matrix,
        y: &[usize],
        classes: Vec<String>,
        schema_hash: u64,
        config: &ForestConfig,
        seed: u64,
    ) -> Result<ForestModel>;
}

/// Trains trees one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialTrainer;

impl ForestTrainer for SequentialTrainer {
    fn train(
        &self,
        x: &Matrix,
        y: &[usize],
        classes: Vec<String>,
        schema_hash: u64,
        config: &ForestConfig,
        seed: u64,
    ) -> Result<ForestModel> {
        train_forest(x, y, classes, schema_hash, config, seed)
    }
}

pub fn stage1_classes() -> Vec<String> {
    STAGE1_CLASSES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageModel {
    pub stage1: BTreeMap<usize, ForestModel>,
    pub stage2: BTreeMap<usize, ForestModel>,
    pub schemas: BTreeMap<usize, FeatureSchema>,
    pub lexicon_fingerprint: u64,
}

impl TwoStageModel {
    pub fn coverage(&self) -> Vec<usize> {
        self.stage1.keys().copied().collect()
    }

    /// Checks that both stages cover the same lengths with matching schemas.
    pub fn validate(&self) -> Result<()> {
        let a: Vec<_> = self.stage1.keys().collect();
        let b: Vec<_> = self.stage2.keys().collect();
        let s: Vec<_> = self.schemas.keys().collect();
        if a != b || a != s {
            return Err(Error::InvalidArgument("stage coverage differs between forests and schemas".into()));
        }
        for (n, schema) in &self.schemas {
            for f in [&self.stage1[n], &self.stage2[n]] {
                if f.schema_hash != schema.hash() || f.width != schema.width() {
                    return Err(Error::InvalidArgument(format!("forest for n={n} does not match its schema")));
                }
            }
        }
        Ok(())
    }
}

pub fn stage_seed(seed: u64, n: usize, stage: u64) -> u64 {
    derive_seed(seed, (n as u64) * 2 + stage)
}

/// One binary and one type forest per length. Lengths whose stage-1 set is
/// empty, or which have no typed concepts, are skipped and reported.
pub fn train_two_stage(
    datasets: &BTreeMap<usize, Dataset>,
    types: &[ConceptType],
    config: &ForestConfig,
    seed: u64,
    lexicon_fingerprint: u64,
    trainer: &dyn ForestTrainer,
) -> Result<(TwoStageModel, Vec<usize>)> {
    let mut model = TwoStageModel {
        stage1: BTreeMap::new(),
        stage2: BTreeMap::new(),
        schemas: BTreeMap::new(),
        lexicon_fingerprint,
    };
    let mut skipped = Vec::new();
    let type_names: Vec<String> = types.iter().map(|t| t.as_str().to_string()).collect();
    for (&n, ds) in datasets {
        let (x2, y2) = ds.stage2(types);
        if ds.samples.is_empty() || y2.is_empty() {
            skipped.push(n);
            continue;
        }
        let hash = ds.schema.hash();
        let s1 = trainer.train(&ds.x, &ds.stage1_labels(), stage1_classes(), hash, config, stage_seed(seed, n, 0))?;
        let s2 = trainer.train(&x2, &y2, type_names.clone(), hash, config, stage_seed(seed, n, 1))?;
        model.stage1.insert(n, s1);
        model.stage2.insert(n, s2);
        model.schemas.insert(n, ds.schema.clone());
    }
    if model.stage1.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    Ok((model, skipped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub verbatim_id: String,
    pub start: usize,
    pub n: usize,
    pub phrase: String,
    pub concept: bool,
    /// Set exactly when `concept` is.
    pub concept_type: Option<String>,
    /// Stage-1 probability of `CONCEPT`.
    pub p_stage1: f64,
    /// Stage-2 probability of the chosen type.
    pub p_stage2: Option<f64>,
}

struct Scored {
    collocate: Collocate,
    p: f64,
    concept: bool,
}

/// Keeps the highest-probability concepts among overlapping ones; ties go to
/// the longer span, then the leftmost. Returns indices of the kept entries.
pub fn resolve_overlaps(spans: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, na, pa) = spans[a];
        let (sb, nb, pb) = spans[b];
        pb.total_cmp(&pa).then(nb.cmp(&na)).then(sa.cmp(&sb))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let (s, n, _) = spans[i];
        if kept.iter().all(|&k| {
            let (ks, kn, _) = spans[k];
            s + n <= ks || ks + kn <= s
        }) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Runs both stages over normalized verbatims.
pub struct Inferencer<'a> {
    pub model: &'a TwoStageModel,
    pub featurizer: Featurizer<'a>,
    pub stops: &'a StopNoiseLists,
    pub tagger: &'a dyn TagProvider,
}

impl<'a> Inferencer<'a> {
    /// Candidates of lengths the model covers, in span order. Concepts that
    /// lose an overlap are dropped; irrelevant candidates are all kept.
    pub fn infer_verbatim(&self, verbatim: &Verbatim) -> Result<Vec<Extraction>> {
        if verbatim.is_empty() {
            return Ok(Vec::new());
        }
        let view = VerbatimView::new(verbatim, self.tagger.tag(verbatim)?, self.featurizer.ontology)?;
        let mut scored = Vec::new();
        let mut buf: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for c in generate_candidates(verbatim, self.stops) {
            let (Some(schema), Some(forest)) = (self.model.schemas.get(&c.n), self.model.stage1.get(&c.n)) else {
                continue;
            };
            let row = buf.entry(c.n).or_insert_with(|| vec![0.0; schema.width()]);
            self.featurizer.assemble_into(c.start, c.n, verbatim, &view, schema, row)?;
            let proba = forest.predict_proba(row)?;
            let concept = crate::forest::argmax(&proba) == CONCEPT_CLASS;
            scored.push(Scored { collocate: c, p: proba[CONCEPT_CLASS], concept });
        }
        let concept_idx: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].concept).collect();
        let triples: Vec<(usize, usize, f64)> = concept_idx
            .iter()
            .map(|&i| (scored[i].collocate.start, scored[i].collocate.n, scored[i].p))
            .collect();
        let winners: BTreeSet<usize> = resolve_overlaps(&triples).into_iter().map(|k| concept_idx[k]).collect();
        let mut out = Vec::new();
        for (i, s) in scored.into_iter().enumerate() {
            if s.concept && !winners.contains(&i) {
                continue;
            }
            let (concept_type, p_stage2) = if s.concept {
                let n = s.collocate.n;
                let row = buf.get_mut(&n).expect("row buffer allocated");
                self.featurizer
                    .assemble_into(s.collocate.start, n, verbatim, &view, &self.model.schemas[&n], row)?;
                let f2 = &self.model.stage2[&n];
                let proba = f2.predict_proba(row)?;
                let k = crate::forest::argmax(&proba);
                (Some(f2.classes[k].clone()), Some(proba[k]))
            } else {
                (None, None)
            };
            out.push(Extraction {
                verbatim_id: s.collocate.verbatim_id,
                start: s.collocate.start,
                n: s.collocate.n,
                phrase: s.collocate.phrase,
                concept: s.concept,
                concept_type,
                p_stage1: s.p,
                p_stage2,
            });
        }
        Ok(out)
    }

    pub fn infer(&self, corpus: &[Verbatim]) -> Result<Vec<Extraction>> {
        let mut out = Vec::new();
        for v in corpus {
            out.extend(self.infer_verbatim(v)?);
        }
        Ok(out)
    }
}

/// Normalizes raw verbatims with the given resources, then infers.
#[allow(clippy::too_many_arguments)]
pub fn infer_raw(
    raw: &[Verbatim],
    lex: &crate::lexicon::Lexicons,
    embeddings: &EmbeddingTable,
    polysemy: &PolysemyModel,
    model: &TwoStageModel,
    tagger: &dyn TagProvider,
) -> Result<Vec<Extraction>> {
    let stats = CorpusStats::build(raw, 1);
    let normalized = crate::normalize::normalize_corpus(raw, lex, &stats, embeddings);
    let inf = Inferencer {
        model,
        featurizer: Featurizer { embeddings, polysemy, ontology: &lex.ontology },
        stops: &lex.stop_noise,
        tagger,
    };
    inf.infer(&normalized.verbatims)
}

/// Eight stage-1 forests over one schema that differ only by seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Committee {
    members: Vec<ForestModel>,
}

impl Committee {
    pub fn from_members(members: Vec<ForestModel>) -> Result<Self> {
        if members.len() != COMMITTEE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "a committee has exactly {COMMITTEE_SIZE} members, got {}",
                members.len()
            )));
        }
        let h = members[0].schema_hash;
        if members.iter().any(|m| m.schema_hash != h || m.classes.len() != STAGE1_CLASSES.len()) {
            return Err(Error::InvalidArgument("committee members disagree on schema or classes".into()));
        }
        Ok(Committee { members })
    }

    pub fn train(data: &Dataset, config: &ForestConfig, seed: u64, trainer: &dyn ForestTrainer) -> Result<Self> {
        let y = data.stage1_labels();
        let hash = data.schema.hash();
        let members = (0..COMMITTEE_SIZE)
            .map(|i| trainer.train(&data.x, &y, stage1_classes(), hash, config, derive_seed(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Committee::from_members(members)
    }

    pub fn members(&self) -> &[ForestModel] {
        &self.members
    }

    /// How many members predict `CONCEPT`.
    pub fn concept_votes(&self, row: &[f64]) -> Result<usize> {
        let mut votes = 0;
        for m in &self.members {
            if m.predict(row)? == CONCEPT_CLASS {
                votes += 1;
            }
        }
        Ok(votes)
    }
}

/// Rows on which the committee splits exactly four against four.
pub fn committee_disagreements(committee: &Committee, rows: &Matrix) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, r) in rows.iter_rows().enumerate() {
        if committee.concept_votes(r)? == COMMITTEE_SIZE / 2 {
            out.push(i);
        }
    }
    Ok(out)
}

/// A selected occurrence shown to whoever labels it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub collocate: Collocate,
    /// Normalized text of the verbatim.
    pub text: String,
}

/// Supplies labels for selected samples. `None` means "not labeled".
pub trait LabelSource {
    fn label(&mut self, queries: &[Query]) -> Result<Vec<Option<Label>>>;
}

/// Labels looked up by occurrence, as read from a label file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    pub labels: BTreeMap<SpanKey, Label>,
}

impl LabelSource for LabelMap {
    fn label(&mut self, queries: &[Query]) -> Result<Vec<Option<Label>>> {
        Ok(queries.iter().map(|q| self.labels.get(&span_key(&q.collocate)).cloned()).collect())
    }
}

/// Unlabeled candidate occurrences with their features, per length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePool {
    pub per_n: BTreeMap<usize, (Vec<Collocate>, Matrix)>,
}

/// Candidates from `corpus` that are not already in `exclude`.
pub fn build_pool(
    corpus: &[Verbatim],
    stops: &StopNoiseLists,
    schemas: &BTreeMap<usize, FeatureSchema>,
    exclude: &BTreeSet<SpanKey>,
    builder: &mut FeatureBuilder<'_>,
) -> Result<CandidatePool> {
    let mut per_n: BTreeMap<usize, Vec<Collocate>> = BTreeMap::new();
    for v in corpus {
        for c in generate_candidates(v, stops) {
            if schemas.contains_key(&c.n) && !exclude.contains(&span_key(&c)) {
                per_n.entry(c.n).or_default().push(c);
            }
        }
    }
    let mut pool = CandidatePool::default();
    for (n, cs) in per_n {
        let x = builder.matrix(&cs, &schemas[&n])?;
        pool.per_n.insert(n, (cs, x));
    }
    Ok(pool)
}

/// Labeled data, per-length committees and the retraining settings.
pub struct ActiveLearner<'a> {
    pub datasets: BTreeMap<usize, Dataset>,
    pub committees: BTreeMap<usize, Committee>,
    pub config: ForestConfig,
    pub seed: u64,
    pub trainer: &'a dyn ForestTrainer,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub selected: usize,
    pub added: usize,
}

impl<'a> ActiveLearner<'a> {
    pub fn new(
        datasets: BTreeMap<usize, Dataset>,
        config: ForestConfig,
        seed: u64,
        trainer: &'a dyn ForestTrainer,
    ) -> Result<Self> {
        let mut committees = BTreeMap::new();
        for (&n, ds) in &datasets {
            if !ds.samples.is_empty() {
                committees.insert(n, Committee::train(ds, &config, derive_seed(seed, n as u64), trainer)?);
            }
        }
        Ok(ActiveLearner { datasets, committees, config, seed, trainer })
    }

    pub fn labeled_keys(&self) -> BTreeSet<SpanKey> {
        self.datasets
            .values()
            .flat_map(|d| d.samples.iter().map(|s| span_key(&s.collocate)))
            .collect()
    }

    /// Selects 4-4 splits from the pool, labels them, appends them and
    /// retrains the affected committees. Samples already labeled are never
    /// selected again.
    pub fn round(
        &mut self,
        pool: &CandidatePool,
        texts: &dyn Fn(&str) -> Option<String>,
        source: &mut dyn LabelSource,
        round: usize,
    ) -> Result<RoundReport> {
        let known = self.labeled_keys();
        let mut picked: Vec<(usize, usize)> = Vec::new();
        let mut queries = Vec::new();
        for (&n, committee) in &self.committees {
            let Some((cs, x)) = pool.per_n.get(&n) else { continue };
            for i in committee_disagreements(committee, x)? {
                if known.contains(&span_key(&cs[i])) {
                    continue;
                }
                let text = texts(&cs[i].verbatim_id).ok_or_else(|| Error::UnknownVerbatim(cs[i].verbatim_id.clone()))?;
                picked.push((n, i));
                queries.push(Query { collocate: cs[i].clone(), text });
            }
        }
        if queries.is_empty() {
            return Ok(RoundReport::default());
        }
        let labels = source.label(&queries)?;
        if labels.len() != queries.len() {
            return Err(Error::LengthMismatch { expected: queries.len(), found: labels.len() });
        }
        let missing: Vec<String> = queries
            .iter()
            .zip(&labels)
            .filter(|(_, l)| l.is_none())
            .map(|(q, _)| format!("{}@{}:{}+{}", q.collocate.phrase, q.collocate.verbatim_id, q.collocate.start, q.collocate.n))
            .collect();
        if !missing.is_empty() {
            return Err(Error::UnlabeledSamples(missing));
        }
        let mut grown = BTreeSet::new();
        for ((n, i), label) in picked.iter().zip(labels) {
            let (cs, x) = &pool.per_n[n];
            let sample = LabeledSample {
                collocate: cs[*i].clone(),
                label: label.expect("checked above"),
                source: SampleSource::ActiveLearning,
            };
            self.datasets.get_mut(n).expect("committee has a dataset").push(sample, x.row(*i))?;
            grown.insert(*n);
        }
        for n in grown {
            let seed = derive_seed(derive_seed(self.seed, n as u64), 1 + round as u64);
            let c = Committee::train(&self.datasets[&n], &self.config, seed, self.trainer)?;
            self.committees.insert(n, c);
        }
        Ok(RoundReport { selected: queries.len(), added: picked.len() })
    }

    pub fn run(
        &mut self,
        pool: &CandidatePool,
        texts: &dyn Fn(&str) -> Option<String>,
        source: &mut dyn LabelSource,
        rounds: usize,
    ) -> Result<Vec<RoundReport>> {
        (0..rounds).map(|r| self.round(pool, texts, source, r)).collect()
    }
}
