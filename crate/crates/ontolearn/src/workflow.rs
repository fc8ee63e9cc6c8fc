//! The pipeline steps the command line strings together, callable directly.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Result};
use log::info;
use ontolearn_core::corpus::{CorpusStats, Verbatim};
use ontolearn_core::embeddings::{train_skipgram, EmbeddingTable};
use ontolearn_core::evaluate::{align_spans, score_per_n, score_stage1, score_stage2, MacroMetrics, Metrics};
use ontolearn_core::features::{FeatureSchema, Featurizer, PolysemyModel};
use ontolearn_core::lexicon::Lexicons;
use ontolearn_core::normalize::NormalizedCorpus;
use ontolearn_core::pipeline::{
    span_key, train_two_stage, Dataset, Extraction, Inferencer, SpanKey, TrainingSet,
};
use ontolearn_core::pos::TagProvider;

use crate::bundle::Bundle;
use crate::config::RunConfig;
use crate::formats::GoldSpan;
use crate::parallel::{self, RayonTrainer};

/// Embeddings used to rank spelling corrections, trained on the raw text.
pub fn raw_embeddings(raw: &[Verbatim], cfg: &RunConfig) -> Result<EmbeddingTable> {
    Ok(train_skipgram(raw, &cfg.skipgram(1))?)
}

/// Embeddings used as features, trained on the normalized text.
pub fn final_embeddings(normalized: &[Verbatim], cfg: &RunConfig) -> Result<EmbeddingTable> {
    Ok(train_skipgram(normalized, &cfg.skipgram(2))?)
}

/// Normalizes with frequencies taken from `raw` itself.
pub fn normalize(raw: &[Verbatim], lex: &Lexicons, emb: &EmbeddingTable) -> NormalizedCorpus {
    let stats = CorpusStats::build(raw, 1);
    parallel::normalize_corpus(raw, lex, &stats, emb)
}

pub fn fit_polysemy(corpus: &[Verbatim], emb: &EmbeddingTable, lex: &Lexicons, cfg: &RunConfig) -> PolysemyModel {
    parallel::fit_polysemy_model(corpus, emb, &lex.senses, &lex.stop_noise, &cfg.polysemy())
}

pub fn schemas(cfg: &RunConfig, dim: usize, lengths: impl IntoIterator<Item = usize>) -> Result<BTreeMap<usize, FeatureSchema>> {
    lengths
        .into_iter()
        .map(|n| Ok((n, FeatureSchema::new(n, dim, &cfg.families)?)))
        .collect()
}

/// Feature rows for every length of `set`.
pub fn datasets(
    corpus: &[Verbatim],
    featurizer: Featurizer<'_>,
    tagger: &dyn TagProvider,
    set: &TrainingSet,
    cfg: &RunConfig,
) -> Result<BTreeMap<usize, Dataset>> {
    let schemas = schemas(cfg, featurizer.embeddings.dim(), set.samples.keys().copied())?;
    let mut out = BTreeMap::new();
    for (n, samples) in &set.samples {
        let ds = parallel::build_dataset(corpus, featurizer, tagger, samples.clone(), &schemas[n])?;
        out.insert(*n, ds);
    }
    Ok(out)
}

/// Fits polysemy centroids, builds features and trains both stages.
pub fn train(
    corpus: &[Verbatim],
    lex: &Lexicons,
    embeddings: EmbeddingTable,
    tagger: &dyn TagProvider,
    set: &TrainingSet,
    cfg: &RunConfig,
) -> Result<Bundle> {
    if set.is_empty() {
        bail!("the training set is empty");
    }
    let polysemy = fit_polysemy(corpus, &embeddings, lex, cfg);
    info!("polysemy centroids fitted for {} phrases", polysemy.centroids.len());
    let featurizer = Featurizer { embeddings: &embeddings, polysemy: &polysemy, ontology: &lex.ontology };
    let data = datasets(corpus, featurizer, tagger, set, cfg)?;
    let (model, skipped) =
        train_two_stage(&data, &cfg.types, &cfg.forest, cfg.seed, lex.fingerprint(), &RayonTrainer)?;
    if !skipped.is_empty() {
        log::warn!("no usable training samples for lengths {skipped:?}; those lengths are not extracted");
    }
    Ok(Bundle { model, embeddings, polysemy, seed: cfg.seed })
}

/// Extracts from already normalized verbatims.
pub fn infer(corpus: &[Verbatim], lex: &Lexicons, bundle: &Bundle, tagger: &dyn TagProvider) -> Result<Vec<Extraction>> {
    if bundle.model.lexicon_fingerprint != lex.fingerprint() {
        log::warn!("the lexicons differ from the ones the model was trained with");
    }
    let inf = Inferencer {
        model: &bundle.model,
        featurizer: Featurizer { embeddings: &bundle.embeddings, polysemy: &bundle.polysemy, ontology: &lex.ontology },
        stops: &lex.stop_noise,
        tagger,
    };
    parallel::infer(&inf, corpus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub stage1: Metrics,
    pub stage1_per_n: BTreeMap<usize, Metrics>,
    pub stage2: MacroMetrics,
    pub stage2_per_n: BTreeMap<usize, MacroMetrics>,
}

pub fn predicted_spans(ex: &[Extraction]) -> Vec<(SpanKey, String)> {
    ex.iter()
        .filter(|e| e.concept)
        .map(|e| ((e.verbatim_id.clone(), e.start, e.n), e.concept_type.clone().unwrap_or_default()))
        .collect()
}

pub fn gold_spans(gold: &[GoldSpan]) -> Vec<(SpanKey, String)> {
    gold.iter()
        .map(|g| ((g.verbatim_id.clone(), g.start, g.n), g.concept_type.clone()))
        .collect()
}

pub fn evaluate(ex: &[Extraction], gold: &[GoldSpan]) -> Result<EvalReport> {
    let outcomes = align_spans(&predicted_spans(ex), &gold_spans(gold));
    Ok(EvalReport {
        stage1: score_stage1(&outcomes)?,
        stage1_per_n: score_per_n(&outcomes, score_stage1)?,
        stage2: score_stage2(&outcomes)?,
        stage2_per_n: score_per_n(&outcomes, score_stage2)?,
    })
}

/// Held-out phrases extracted, at a gold position, at least once.
pub fn recovered_holdouts<'a>(ex: &[Extraction], gold: &[GoldSpan], holdout: &BTreeSet<&'a str>) -> BTreeSet<&'a str> {
    let hits: BTreeSet<SpanKey> = ex
        .iter()
        .filter(|e| e.concept)
        .map(|e| (e.verbatim_id.clone(), e.start, e.n))
        .collect();
    gold.iter()
        .filter(|g| hits.contains(&(g.verbatim_id.clone(), g.start, g.n)))
        .filter_map(|g| holdout.get(g.phrase.as_str()).copied())
        .collect()
}

/// Occurrence keys of a training set.
pub fn keys(set: &TrainingSet) -> BTreeSet<SpanKey> {
    set.iter().map(|s| span_key(&s.collocate)).collect()
}
