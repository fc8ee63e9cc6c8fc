//! Per-collocate feature vectors.
//!
//! A vector is the concatenation of up to nine blocks, always in this order:
//!
//! | family              | width   |
//! |---------------------|---------|
//! | collocate POS       | n × 13  |
//! | left 3 POS          | 3 × 13  |
//! | right 3 POS         | 3 × 13  |
//! | left concept POS    | 13      |
//! | right concept POS   | 13      |
//! | word2vec            | d       |
//! | context             | 2d      |
//! | polysemy            | 2d      |
//! | ontology membership | n       |

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::corpus::{spans, Verbatim, MAX_NGRAM};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, nearest, DEFAULT_MAX_ITER};
use crate::lexicon::{sense_count_for, SeedOntology, SenseLexicon, DEFAULT_SENSE_CAP};
use crate::pipeline::tag_seed_concepts;
use crate::pos::PosTag;
use crate::rng::{derive_seed, fnv1a, seeded};

/// Number of neighbors on each side used by the POS and context features.
pub const NEIGHBORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureFamily {
    CollocatePos,
    LeftPos,
    RightPos,
    LeftConceptPos,
    RightConceptPos,
    Word2vec,
    Context,
    Polysemy,
    Ontology,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 9] = [
        FeatureFamily::CollocatePos,
        FeatureFamily::LeftPos,
        FeatureFamily::RightPos,
        FeatureFamily::LeftConceptPos,
        FeatureFamily::RightConceptPos,
        FeatureFamily::Word2vec,
        FeatureFamily::Context,
        FeatureFamily::Polysemy,
        FeatureFamily::Ontology,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::CollocatePos => "collocate_pos",
            FeatureFamily::LeftPos => "left3_pos",
            FeatureFamily::RightPos => "right3_pos",
            FeatureFamily::LeftConceptPos => "left_concept_pos",
            FeatureFamily::RightConceptPos => "right_concept_pos",
            FeatureFamily::Word2vec => "word2vec",
            FeatureFamily::Context => "context",
            FeatureFamily::Polysemy => "polysemy",
            FeatureFamily::Ontology => "ontology",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureFamily> {
        FeatureFamily::ALL.iter().copied().find(|f| f.as_str() == s)
    }

    pub fn width(self, n: usize, dim: usize) -> usize {
        match self {
            FeatureFamily::CollocatePos => n * PosTag::COUNT,
            FeatureFamily::LeftPos | FeatureFamily::RightPos => NEIGHBORS * PosTag::COUNT,
            FeatureFamily::LeftConceptPos | FeatureFamily::RightConceptPos => PosTag::COUNT,
            FeatureFamily::Word2vec => dim,
            FeatureFamily::Context | FeatureFamily::Polysemy => 2 * dim,
            FeatureFamily::Ontology => n,
        }
    }

    /// Whether the block is made of 13-wide one-hot groups.
    pub fn is_one_hot(self) -> bool {
        matches!(
            self,
            FeatureFamily::CollocatePos
                | FeatureFamily::LeftPos
                | FeatureFamily::RightPos
                | FeatureFamily::LeftConceptPos
                | FeatureFamily::RightConceptPos
        )
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub family: FeatureFamily,
    pub offset: usize,
    pub width: usize,
}

/// Column layout for collocates of one length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    n: usize,
    dim: usize,
    blocks: Vec<Block>,
}

impl FeatureSchema {
    /// Enabled families are laid out in canonical order regardless of the
    /// order given.
    pub fn new(n: usize, dim: usize, families: &[FeatureFamily]) -> Result<Self> {
        if n == 0 || n > MAX_NGRAM {
            return Err(Error::InvalidArgument(alloc::format!("collocate length {n} out of range")));
        }
        let mut blocks = Vec::new();
        let mut offset = 0;
        for f in FeatureFamily::ALL {
            if families.contains(&f) {
                let width = f.width(n, dim);
                blocks.push(Block { family: f, offset, width });
                offset += width;
            }
        }
        Ok(FeatureSchema { n, dim, blocks })
    }

    pub fn full(n: usize, dim: usize) -> Result<Self> {
        FeatureSchema::new(n, dim, &FeatureFamily::ALL)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn families(&self) -> Vec<FeatureFamily> {
        self.blocks.iter().map(|b| b.family).collect()
    }

    pub fn has(&self, family: FeatureFamily) -> bool {
        self.blocks.iter().any(|b| b.family == family)
    }

    pub fn block(&self, family: FeatureFamily) -> Option<Block> {
        self.blocks.iter().copied().find(|b| b.family == family)
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.width).sum()
    }

    /// `n=<n> dim=<d> families=<a,b,...>`.
    pub fn describe(&self) -> String {
        let fams: Vec<&str> = self.blocks.iter().map(|b| b.family.as_str()).collect();
        alloc::format!("n={} dim={} families={}", self.n, self.dim, fams.join(","))
    }

    pub fn parse(desc: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(alloc::format!("bad schema description {desc:?}"));
        let mut n = None;
        let mut dim = None;
        let mut families = Vec::new();
        for part in desc.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
                "families" => {
                    for f in v.split(',').filter(|s| !s.is_empty()) {
                        families.push(FeatureFamily::parse(f).ok_or_else(bad)?);
                    }
                }
                _ => return Err(bad()),
            }
        }
        FeatureSchema::new(n.ok_or_else(bad)?, dim.ok_or_else(bad)?, &families)
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.describe().as_bytes())
    }

    /// Same layout parameters with only `families` enabled.
    pub fn with_families(&self, families: &[FeatureFamily]) -> Self {
        FeatureSchema::new(self.n, self.dim, families).unwrap_or_else(|_| self.clone())
    }

    /// Column indices of `self` inside a vector laid out by `full`.
    pub fn columns_in(&self, full: &FeatureSchema) -> Vec<usize> {
        let mut cols = Vec::with_capacity(self.width());
        for b in &self.blocks {
            if let Some(src) = full.block(b.family) {
                cols.extend(src.offset..src.offset + src.width);
            }
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema_hash: u64,
    pub values: Vec<f64>,
}

fn one_hot(out: &mut [f64], tag: PosTag) {
    out.fill(0.0);
    out[tag.index()] = 1.0;
}

/// POS-derived blocks for one collocate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinguisticFeatures {
    pub collocate: Vec<PosTag>,
    /// Nearest first: `left[0]` is the token right before the collocate.
    pub left: [PosTag; NEIGHBORS],
    pub right: [PosTag; NEIGHBORS],
    pub left_concept: PosTag,
    pub right_concept: PosTag,
}

/// Tags of the collocate, its three neighbors per side (padded with `NONE`)
/// and the first token of the nearest seed concept on each side that does
/// not overlap it.
pub fn linguistic_features(start: usize, n: usize, tags: &[PosTag], concept_spans: &[(usize, usize)]) -> LinguisticFeatures {
    let end = start + n;
    let mut left = [PosTag::None; NEIGHBORS];
    let mut right = [PosTag::None; NEIGHBORS];
    for k in 0..NEIGHBORS {
        if start > k {
            left[k] = tags[start - 1 - k];
        }
        if end + k < tags.len() {
            right[k] = tags[end + k];
        }
    }
    let left_concept = concept_spans
        .iter()
        .filter(|(s, m)| s + m <= start)
        .max_by_key(|(s, m)| s + m)
        .map_or(PosTag::None, |(s, _)| tags[*s]);
    let right_concept = concept_spans
        .iter()
        .filter(|(s, _)| *s >= end)
        .min_by_key(|(s, _)| *s)
        .map_or(PosTag::None, |(s, _)| tags[*s]);
    LinguisticFeatures {
        collocate: tags[start..end].to_vec(),
        left,
        right,
        left_concept,
        right_concept,
    }
}

/// Mean embedding of up to three tokens on the left, then on the right.
/// Missing neighbors are left out of the mean; no neighbor gives zeros.
pub fn context_feature(start: usize, n: usize, verbatim: &Verbatim, table: &EmbeddingTable) -> Vec<f64> {
    let mut out = vec![0.0; 2 * table.dim()];
    context_into(start, n, verbatim, table, &mut out);
    out
}

fn context_into(start: usize, n: usize, verbatim: &Verbatim, table: &EmbeddingTable, out: &mut [f64]) {
    let d = table.dim();
    out.fill(0.0);
    let (left, right) = out.split_at_mut(d);
    let lo = start.saturating_sub(NEIGHBORS);
    let mut count = 0;
    for t in &verbatim.tokens[lo..start] {
        table.add_into(&t.norm, left);
        count += 1;
    }
    if count > 1 {
        left.iter_mut().for_each(|x| *x /= count as f64);
    }
    let end = start + n;
    let hi = (end + NEIGHBORS).min(verbatim.len());
    count = 0;
    for t in &verbatim.tokens[end..hi] {
        table.add_into(&t.norm, right);
        count += 1;
    }
    if count > 1 {
        right.iter_mut().for_each(|x| *x /= count as f64);
    }
}

/// 1 for each of the collocate's words that is a seed-concept constituent.
pub fn ontology_feature(phrase: &str, onto: &SeedOntology) -> Vec<f64> {
    phrase
        .split_whitespace()
        .map(|w| if onto.has_unigram(w) { 1.0 } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolysemyConfig {
    pub sample_cap: usize,
    pub min_occurrences: usize,
    pub p_max: u32,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PolysemyConfig {
    fn default() -> Self {
        PolysemyConfig {
            sample_cap: 1000,
            min_occurrences: 20,
            p_max: DEFAULT_SENSE_CAP,
            max_iter: DEFAULT_MAX_ITER,
            seed: 7,
        }
    }
}

/// Context-vector centroids per phrase, one per sense.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolysemyModel {
    pub centroids: BTreeMap<String, Vec<Vec<f64>>>,
    pub sample_cap: usize,
}

/// First occurrence `(verbatim index, start)` of each phrase per verbatim.
#[derive(Debug, Clone, Default)]
pub struct OccurrenceIndex {
    pub occurrences: BTreeMap<String, Vec<(usize, usize)>>,
}

impl OccurrenceIndex {
    /// Indexes every span of up to four tokens for which `keep` holds.
    pub fn build(corpus: &[Verbatim], mut keep: impl FnMut(&str) -> bool) -> Self {
        let mut occurrences: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        for (vi, v) in corpus.iter().enumerate() {
            for (s, n) in spans(&v.tokens, MAX_NGRAM) {
                let phrase = v.phrase(s, n);
                if !keep(&phrase) {
                    continue;
                }
                let list = occurrences.entry(phrase).or_default();
                if list.last().is_none_or(|&(last, _)| last != vi) {
                    list.push((vi, s));
                }
            }
        }
        OccurrenceIndex { occurrences }
    }

    /// Occurrences of one phrase, found by scanning.
    pub fn scan(corpus: &[Verbatim], phrase: &str) -> Vec<(usize, usize)> {
        let words: Vec<&str> = phrase.split_whitespace().collect();
        corpus
            .iter()
            .enumerate()
            .filter_map(|(vi, v)| v.find_phrase(&words).first().map(|&s| (vi, s)))
            .collect()
    }
}

fn fit_from_occurrences(
    corpus: &[Verbatim],
    occurrences: &[(usize, usize)],
    phrase: &str,
    table: &EmbeddingTable,
    senses: &SenseLexicon,
    config: &PolysemyConfig,
) -> Vec<Vec<f64>> {
    let n = phrase.split_whitespace().count();
    let mut rng = seeded(derive_seed(config.seed, fnv1a(phrase.as_bytes())));
    let mut chosen: Vec<(usize, usize)> = occurrences.to_vec();
    if chosen.len() > config.sample_cap {
        chosen.shuffle(&mut rng);
        chosen.truncate(config.sample_cap);
        chosen.sort_unstable();
    }
    let points: Vec<Vec<f64>> = chosen
        .iter()
        .map(|&(vi, s)| context_feature(s, n, &corpus[vi], table))
        .collect();
    let k = sense_count_for(phrase, senses, config.p_max) as usize;
    kmeans(&points, k, config.max_iter, &mut rng).centroids
}

/// Clusters the context vectors of `phrase` into as many groups as it has
/// senses.
pub fn fit_polysemy(
    corpus: &[Verbatim],
    table: &EmbeddingTable,
    senses: &SenseLexicon,
    phrase: &str,
    config: &PolysemyConfig,
) -> Result<Vec<Vec<f64>>> {
    let occ = OccurrenceIndex::scan(corpus, phrase);
    if occ.is_empty() {
        return Err(Error::PhraseNotInCorpus(phrase.to_string()));
    }
    Ok(fit_from_occurrences(corpus, &occ, phrase, table, senses, config))
}

impl PolysemyModel {
    /// Fits every indexed phrase with at least `min_occurrences` verbatims.
    pub fn fit_indexed(
        corpus: &[Verbatim],
        index: &OccurrenceIndex,
        table: &EmbeddingTable,
        senses: &SenseLexicon,
        config: &PolysemyConfig,
    ) -> Self {
        let mut model = PolysemyModel {
            centroids: BTreeMap::new(),
            sample_cap: config.sample_cap,
        };
        for (phrase, occ) in &index.occurrences {
            if occ.len() >= config.min_occurrences {
                let c = fit_from_occurrences(corpus, occ, phrase, table, senses, config);
                model.centroids.insert(phrase.clone(), c);
            }
        }
        model
    }

    /// Fits one phrase from a precomputed occurrence list.
    pub fn fit_one(
        corpus: &[Verbatim],
        occurrences: &[(usize, usize)],
        phrase: &str,
        table: &EmbeddingTable,
        senses: &SenseLexicon,
        config: &PolysemyConfig,
    ) -> Vec<Vec<f64>> {
        fit_from_occurrences(corpus, occurrences, phrase, table, senses, config)
    }

    pub fn get(&self, phrase: &str) -> Option<&[Vec<f64>]> {
        self.centroids.get(phrase).map(Vec::as_slice)
    }
}

/// Nearest fitted centroid to the collocate's context vector, or zeros when
/// the phrase was never fitted.
pub fn polysemy_feature(phrase: &str, context: &[f64], model: &PolysemyModel) -> Vec<f64> {
    match model.get(phrase) {
        Some(cs) if !cs.is_empty() => cs[nearest(context, cs)].clone(),
        _ => vec![0.0; context.len()],
    }
}

/// Per-verbatim data shared by all of its collocates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbatimView {
    pub tags: Vec<PosTag>,
    pub concept_spans: Vec<(usize, usize)>,
}

impl VerbatimView {
    pub fn new(verbatim: &Verbatim, tags: Vec<PosTag>, onto: &SeedOntology) -> Result<Self> {
        if tags.len() != verbatim.len() {
            return Err(Error::TagLengthMismatch {
                verbatim_id: verbatim.id.clone(),
                expected: verbatim.len(),
                found: tags.len(),
            });
        }
        let concept_spans = tag_seed_concepts(verbatim, onto)
            .into_iter()
            .map(|c| (c.start, c.n))
            .collect();
        Ok(VerbatimView { tags, concept_spans })
    }
}

/// The trained resources features are computed from.
#[derive(Debug, Clone, Copy)]
pub struct Featurizer<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub polysemy: &'a PolysemyModel,
    pub ontology: &'a SeedOntology,
}

impl<'a> Featurizer<'a> {
    pub fn assemble(
        &self,
        start: usize,
        n: usize,
        verbatim: &Verbatim,
        view: &VerbatimView,
        schema: &FeatureSchema,
    ) -> Result<FeatureVector> {
        let mut values = vec![0.0; schema.width()];
        self.assemble_into(start, n, verbatim, view, schema, &mut values)?;
        Ok(FeatureVector {
            schema_hash: schema.hash(),
            values,
        })
    }

    /// Writes the features of span `start..start + n` into `out`.
    pub fn assemble_into(
        &self,
        start: usize,
        n: usize,
        verbatim: &Verbatim,
        view: &VerbatimView,
        schema: &FeatureSchema,
        out: &mut [f64],
    ) -> Result<()> {
        if schema.n() != n {
            return Err(Error::SchemaMismatch {
                schema_n: schema.n(),
                collocate_n: n,
            });
        }
        if out.len() != schema.width() {
            return Err(Error::LengthMismatch {
                expected: schema.width(),
                found: out.len(),
            });
        }
        if start + n > verbatim.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "span {start}+{n} outside verbatim {} of length {}",
                verbatim.id,
                verbatim.len()
            )));
        }
        let d = self.embeddings.dim();
        if schema.dim() != d {
            return Err(Error::LengthMismatch {
                expected: schema.dim(),
                found: d,
            });
        }
        let phrase = verbatim.phrase(start, n);
        let ling = if schema.blocks().iter().any(|b| b.family.is_one_hot()) {
            Some(linguistic_features(start, n, &view.tags, &view.concept_spans))
        } else {
            None
        };
        let mut context: Option<Vec<f64>> = None;
        for b in schema.blocks() {
            let dst = &mut out[b.offset..b.offset + b.width];
            match b.family {
                FeatureFamily::CollocatePos => {
                    let l = ling.as_ref().expect("linguistic features computed");
                    for (chunk, tag) in dst.chunks_mut(PosTag::COUNT).zip(&l.collocate) {
                        one_hot(chunk, *tag);
                    }
                }
                FeatureFamily::LeftPos | FeatureFamily::RightPos => {
                    let l = ling.as_ref().expect("linguistic features computed");
                    let tags = if b.family == FeatureFamily::LeftPos { &l.left } else { &l.right };
                    for (chunk, tag) in dst.chunks_mut(PosTag::COUNT).zip(tags) {
                        one_hot(chunk, *tag);
                    }
                }
                FeatureFamily::LeftConceptPos => {
                    one_hot(dst, ling.as_ref().expect("linguistic features computed").left_concept)
                }
                FeatureFamily::RightConceptPos => {
                    one_hot(dst, ling.as_ref().expect("linguistic features computed").right_concept)
                }
                FeatureFamily::Word2vec => {
                    dst.copy_from_slice(&self.embeddings.average_embedding(&phrase));
                }
                FeatureFamily::Context | FeatureFamily::Polysemy => {
                    let ctx = context.get_or_insert_with(|| context_feature(start, n, verbatim, self.embeddings));
                    if b.family == FeatureFamily::Context {
                        dst.copy_from_slice(ctx);
                    } else {
                        match self.polysemy.get(&phrase) {
                            Some(cs) if !cs.is_empty() && cs[0].len() == ctx.len() => {
                                dst.copy_from_slice(&cs[nearest(ctx, cs)])
                            }
                            _ => dst.fill(0.0),
                        }
                    }
                }
                FeatureFamily::Ontology => {
                    for (x, w) in dst.iter_mut().zip(phrase.split(' ')) {
                        *x = if self.ontology.has_unigram(w) { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        Ok(())
    }
}
