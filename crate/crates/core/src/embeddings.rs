//! Skip-gram word embeddings trained with negative sampling.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::corpus::Verbatim;
use crate::error::{Error, Result};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    pub min_count: u64,
    pub learning_rate: f32,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            epochs: 5,
            negative: 5,
            min_count: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// 1-gram vectors. Words without an entry read as the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    min_count: u64,
    vectors: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, min_count: u64) -> Self {
        EmbeddingTable {
            dim,
            min_count,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// The stored vector, or zeros.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        match self.vectors.get(word) {
            Some(v) => v.iter().map(|&x| f64::from(x)).collect(),
            None => vec![0.0; self.dim],
        }
    }

    /// Adds the vector of `word` into `acc`; returns whether it was present.
    pub fn add_into(&self, word: &str, acc: &mut [f64]) -> bool {
        match self.vectors.get(word) {
            Some(v) => {
                for (a, &x) in acc.iter_mut().zip(v) {
                    *a += f64::from(x);
                }
                true
            }
            None => false,
        }
    }

    /// Mean of the vectors of the phrase's 1-grams; missing words count as
    /// zero vectors in the mean.
    pub fn average_embedding(&self, phrase: &str) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for w in phrase.split_whitespace() {
            self.add_into(w, &mut acc);
            n += 1;
        }
        if n > 1 {
            let inv = 1.0 / n as f64;
            acc.iter_mut().for_each(|a| *a *= inv);
        }
        acc
    }

    /// Cosine similarity between two words' vectors (0 when either is absent).
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        match (self.vectors.get(a), self.vectors.get(b)) {
            (Some(u), Some(v)) => cosine_f32(u, v),
            _ => 0.0,
        }
    }
}

pub fn lookup(table: &EmbeddingTable, word: &str) -> Vec<f64> {
    table.lookup(word)
}

pub fn average_embedding(table: &EmbeddingTable, phrase: &str) -> Vec<f64> {
    table.average_embedding(phrase)
}

/// `u·v / (|u||v|)`, or 0 when either norm is 0.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (math::sqrt(nu) * math::sqrt(nv))).clamp(-1.0, 1.0))
}

fn cosine_f32(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (math::sqrt(nu) * math::sqrt(nv))).clamp(-1.0, 1.0)
}

const NEG_TABLE_SIZE: usize = 1_000_000;
const MAX_EXP: f32 = 6.0;

/// Trains skip-gram with negative sampling over the token norms of `corpus`.
///
/// Single-threaded and fully deterministic for a given seed.
pub fn train_skipgram(corpus: &[Verbatim], config: &SkipGramConfig) -> Result<EmbeddingTable> {
    if config.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for v in corpus {
        for t in &v.tokens {
            *counts.entry(t.norm.as_str()).or_insert(0) += 1;
        }
    }
    let vocab: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_count: config.min_count,
        });
    }
    let index: BTreeMap<&str, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, (w, _))| (*w, i as u32))
        .collect();
    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|v| v.norms().filter_map(|w| index.get(w).copied()).collect::<Vec<u32>>())
        .filter(|s| s.len() > 1)
        .collect();

    let dim = config.dim;
    let vsize = vocab.len();
    let mut rng = rng::seeded(config.seed);
    let mut input: Vec<f32> = (0..vsize * dim)
        .map(|_| (rng.gen::<f32>() - 0.5) / dim as f32)
        .collect();
    let mut output: Vec<f32> = vec![0.0; vsize * dim];

    // Unigram^0.75 table for negative draws.
    let total_pow: f64 = vocab.iter().map(|&(_, c)| math::powf(c as f64, 0.75)).sum();
    let mut neg_table: Vec<u32> = Vec::with_capacity(NEG_TABLE_SIZE);
    let mut cumulative = 0.0;
    for (i, &(_, c)) in vocab.iter().enumerate() {
        cumulative += math::powf(c as f64, 0.75) / total_pow;
        let upto = ((cumulative * NEG_TABLE_SIZE as f64) as usize).min(NEG_TABLE_SIZE);
        while neg_table.len() < upto {
            neg_table.push(i as u32);
        }
    }
    while neg_table.len() < NEG_TABLE_SIZE {
        neg_table.push((vsize - 1) as u32);
    }

    let total_words: usize = sentences.iter().map(Vec::len).sum::<usize>() * config.epochs.max(1);
    let mut processed = 0usize;
    let mut grad = vec![0.0f32; dim];
    for _ in 0..config.epochs {
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed as f32 / (total_words as f32 + 1.0);
                let alpha = (config.learning_rate * (1.0 - progress)).max(config.learning_rate * 1e-4);
                processed += 1;
                let shrink = if config.window > 0 { rng.gen_range(0..config.window) } else { 0 };
                let reach = config.window - shrink;
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach + 1).min(sentence.len());
                for (cpos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    // Predict `context` from `center`.
                    let in_row = center as usize * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for d in 0..=config.negative {
                        let (target, label) = if d == 0 {
                            (context, 1.0f32)
                        } else {
                            let t = neg_table[rng.gen_range(0..NEG_TABLE_SIZE)];
                            if t == context {
                                continue;
                            }
                            (t, 0.0f32)
                        };
                        let out_row = target as usize * dim;
                        let mut f = 0.0f32;
                        for k in 0..dim {
                            f += input[in_row + k] * output[out_row + k];
                        }
                        let g = if f > MAX_EXP {
                            (label - 1.0) * alpha
                        } else if f < -MAX_EXP {
                            label * alpha
                        } else {
                            (label - 1.0 / (1.0 + math::expf(-f))) * alpha
                        };
                        for k in 0..dim {
                            grad[k] += g * output[out_row + k];
                            output[out_row + k] += g * input[in_row + k];
                        }
                    }
                    for k in 0..dim {
                        input[in_row + k] += grad[k];
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(dim, config.min_count);
    for (i, (w, _)) in vocab.iter().enumerate() {
        table
            .vectors
            .insert(String::from(*w), input[i * dim..(i + 1) * dim].to_vec());
    }
    Ok(table)
}
