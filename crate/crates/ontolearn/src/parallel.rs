//! Rayon-backed versions of the embarrassingly parallel steps. Each one
//! produces exactly what its sequential counterpart in `ontolearn-core`
//! produces, whatever the thread count.

use std::collections::BTreeMap;

use anyhow::Result;
use ontolearn_core::corpus::{Collocate, CorpusStats, Verbatim};
use ontolearn_core::embeddings::EmbeddingTable;
use ontolearn_core::features::{FeatureSchema, Featurizer, PolysemyConfig, PolysemyModel};
use ontolearn_core::forest::{train_member, ForestConfig, ForestModel, Matrix};
use ontolearn_core::lexicon::{Lexicons, SenseLexicon, StopNoiseLists};
use ontolearn_core::normalize::{expand_abbreviations, resolve_abbreviations, NormalizedCorpus, Speller};
use ontolearn_core::pipeline::{
    polysemy_index, Dataset, Extraction, FeatureBuilder, ForestTrainer, Inferencer, LabeledSample,
};
use ontolearn_core::pos::TagProvider;
use rayon::prelude::*;

/// Trains the trees of a forest in parallel.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonTrainer;

impl ForestTrainer for RayonTrainer {
    fn train(
        &self,
        x: &Matrix,
        y: &[usize],
        classes: Vec<String>,
        schema_hash: u64,
        config: &ForestConfig,
        seed: u64,
    ) -> ontolearn_core::Result<ForestModel> {
        let n_classes = classes.len();
        let trees = (0..config.n_trees.max(1))
            .into_par_iter()
            .map(|i| train_member(x, y, n_classes, config, seed, i))
            .collect::<ontolearn_core::Result<Vec<_>>>()?;
        ForestModel::from_parts(config.clone(), classes, schema_hash, x.width(), seed, trees)
    }
}

/// Same result as `normalize_corpus`.
pub fn normalize_corpus(corpus: &[Verbatim], lex: &Lexicons, stats: &CorpusStats, emb: &EmbeddingTable) -> NormalizedCorpus {
    let speller = Speller::new(lex);
    let (repaired, mut logs): (Vec<_>, Vec<_>) = corpus.par_iter().map(|v| speller.repair(v, stats, emb)).unzip();
    let repaired_stats = CorpusStats::build(&repaired, 1);
    let choices = resolve_abbreviations(lex, &repaired, &repaired_stats);
    let verbatims = repaired
        .par_iter()
        .zip(logs.par_iter_mut())
        .map(|(v, log)| expand_abbreviations(v, lex, &choices, log))
        .collect();
    NormalizedCorpus { verbatims, logs, choices }
}

/// Same result as `fit_polysemy_model`.
pub fn fit_polysemy_model(
    corpus: &[Verbatim],
    table: &EmbeddingTable,
    senses: &SenseLexicon,
    stops: &StopNoiseLists,
    config: &PolysemyConfig,
) -> PolysemyModel {
    let index = polysemy_index(corpus, stops);
    let eligible: Vec<(&String, &Vec<(usize, usize)>)> =
        index.occurrences.iter().filter(|(_, occ)| occ.len() >= config.min_occurrences).collect();
    let centroids = eligible
        .into_par_iter()
        .map(|(phrase, occ)| (phrase.clone(), PolysemyModel::fit_one(corpus, occ, phrase, table, senses, config)))
        .collect::<BTreeMap<_, _>>();
    PolysemyModel { centroids, sample_cap: config.sample_cap }
}

const CHUNK: usize = 512;

/// Same result as `FeatureBuilder::dataset`.
pub fn build_dataset(
    corpus: &[Verbatim],
    featurizer: Featurizer<'_>,
    tagger: &dyn TagProvider,
    samples: Vec<LabeledSample>,
    schema: &FeatureSchema,
) -> Result<Dataset> {
    let collocates: Vec<Collocate> = samples.iter().map(|s| s.collocate.clone()).collect();
    let x = build_matrix(corpus, featurizer, tagger, &collocates, schema)?;
    let mut ds = Dataset::empty(schema.clone());
    for (i, s) in samples.into_iter().enumerate() {
        ds.push(s, x.row(i))?;
    }
    Ok(ds)
}

/// Same result as `FeatureBuilder::matrix`.
pub fn build_matrix(
    corpus: &[Verbatim],
    featurizer: Featurizer<'_>,
    tagger: &dyn TagProvider,
    collocates: &[Collocate],
    schema: &FeatureSchema,
) -> Result<Matrix> {
    let parts = collocates
        .par_chunks(CHUNK)
        .map(|chunk| FeatureBuilder::new(corpus, featurizer, tagger).matrix(chunk, schema))
        .collect::<ontolearn_core::Result<Vec<Matrix>>>()?;
    let mut x = Matrix::new(schema.width());
    for part in parts {
        for r in part.iter_rows() {
            x.push_row(r)?;
        }
    }
    Ok(x)
}

/// Same result as `Inferencer::infer`.
pub fn infer(inf: &Inferencer<'_>, corpus: &[Verbatim]) -> Result<Vec<Extraction>> {
    let per = corpus
        .par_iter()
        .map(|v| inf.infer_verbatim(v))
        .collect::<ontolearn_core::Result<Vec<_>>>()?;
    Ok(per.into_iter().flatten().collect())
}
