//! Precision, recall and F1, and feature-family ablations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureSchema};
use crate::forest::ForestConfig;
use crate::pipeline::{stage1_classes, Dataset, ForestTrainer, SpanKey, CONCEPT_CLASS};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean, 0 when both are 0.
pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Metrics { tp, fp, fn_, precision, recall, f1: harmonic(precision, recall) }
    }

    pub fn merge(&self, other: &Metrics) -> Metrics {
        Metrics::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// Binary scoring of aligned `(predicted, gold)` pairs; `true` is positive.
pub fn score(pairs: &[(bool, bool)]) -> Result<Metrics> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &(p, g) in pairs {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_))
}

/// One span in the union of predictions and gold. `None` means "not a
/// concept"; otherwise the concept type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Outcome {
    pub n: usize,
    pub predicted: Option<String>,
    pub gold: Option<String>,
}

/// Aligns predicted and gold concept spans by exact `(verbatim, start, n)`.
pub fn align_spans(predicted: &[(SpanKey, String)], gold: &[(SpanKey, String)]) -> Vec<Outcome> {
    let mut table: BTreeMap<&SpanKey, (Option<String>, Option<String>)> = BTreeMap::new();
    for (k, t) in predicted {
        table.entry(k).or_default().0 = Some(t.clone());
    }
    for (k, t) in gold {
        table.entry(k).or_default().1 = Some(t.clone());
    }
    table
        .into_iter()
        .map(|(k, (predicted, gold))| Outcome { n: k.2, predicted, gold })
        .collect()
}

/// Stage 1: a span counts as correct when both sides call it a concept.
pub fn score_stage1(outcomes: &[Outcome]) -> Result<Metrics> {
    let pairs: Vec<(bool, bool)> = outcomes.iter().map(|o| (o.predicted.is_some(), o.gold.is_some())).collect();
    score(&pairs)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MacroMetrics {
    pub per_class: BTreeMap<String, Metrics>,
    /// Mean of per-class precision.
    pub precision: f64,
    /// Mean of per-class recall.
    pub recall: f64,
    /// Harmonic mean of the two averages.
    pub f1: f64,
}

/// Stage 2, macro-averaged over types. A predicted concept with no gold
/// counterpart is a false positive for its predicted type. Types that occur
/// on neither side are left out of the average.
pub fn score_stage2(outcomes: &[Outcome]) -> Result<MacroMetrics> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let classes: BTreeSet<&String> = outcomes
        .iter()
        .flat_map(|o| o.predicted.iter().chain(o.gold.iter()))
        .collect();
    let mut per_class = BTreeMap::new();
    for c in classes {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for o in outcomes {
            let p = o.predicted.as_ref() == Some(c);
            let g = o.gold.as_ref() == Some(c);
            match (p, g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        per_class.insert(c.clone(), Metrics::from_counts(tp, fp, fn_));
    }
    let k = per_class.len().max(1) as f64;
    let precision = per_class.values().map(|m| m.precision).sum::<f64>() / k;
    let recall = per_class.values().map(|m| m.recall).sum::<f64>() / k;
    Ok(MacroMetrics { per_class, precision, recall, f1: harmonic(precision, recall) })
}

/// Applies `scorer` to each length separately; lengths without outcomes are
/// left out.
pub fn score_per_n<T>(outcomes: &[Outcome], scorer: impl Fn(&[Outcome]) -> Result<T>) -> Result<BTreeMap<usize, T>> {
    let mut by_n: BTreeMap<usize, Vec<Outcome>> = BTreeMap::new();
    for o in outcomes {
        by_n.entry(o.n).or_default().push(o.clone());
    }
    by_n.into_iter().map(|(n, os)| Ok((n, scorer(&os)?))).collect()
}

/// Train and held-out rows for one collocate length.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSplit {
    pub train: Dataset,
    pub eval: Dataset,
}

/// Shuffles rows under `seed` and holds out `eval_fraction` of them.
pub fn split_dataset(ds: &Dataset, eval_fraction: f64, seed: u64) -> AblationSplit {
    let mut idx: Vec<usize> = (0..ds.samples.len()).collect();
    idx.shuffle(&mut seeded(seed));
    let k = ((ds.samples.len() as f64) * eval_fraction.clamp(0.0, 1.0)) as usize;
    let (mut eval, mut train) = (idx[..k].to_vec(), idx[k..].to_vec());
    eval.sort_unstable();
    train.sort_unstable();
    let pick = |rows: &[usize]| Dataset {
        schema: ds.schema.clone(),
        x: ds.x.select_rows(rows),
        samples: rows.iter().map(|&r| ds.samples[r].clone()).collect(),
    };
    AblationSplit { train: pick(&train), eval: pick(&eval) }
}

/// Everything an ablation retrains with; identical for every variant.
pub struct Ablation<'a> {
    pub splits: &'a BTreeMap<usize, AblationSplit>,
    pub config: ForestConfig,
    pub seed: u64,
    pub trainer: &'a dyn ForestTrainer,
}

impl<'a> Ablation<'a> {
    /// Families shared by every split's schema, in canonical order.
    pub fn families(&self) -> Vec<FeatureFamily> {
        FeatureFamily::ALL
            .iter()
            .copied()
            .filter(|f| self.splits.values().all(|s| s.train.schema.has(*f)))
            .collect()
    }

    /// Stage-1 F1 on the held-out rows, pooled over lengths, when only
    /// `families` are used.
    pub fn f1_with(&self, families: &[FeatureFamily]) -> Result<f64> {
        let mut pairs = Vec::new();
        for (&n, split) in self.splits {
            let schema: FeatureSchema = split.train.schema.with_families(families);
            let cols = schema.columns_in(&split.train.schema);
            let x = split.train.x.select_columns(&cols);
            let y = split.train.stage1_labels();
            if y.is_empty() {
                continue;
            }
            let seed = derive_seed(self.seed, n as u64);
            let forest = self.trainer.train(&x, &y, stage1_classes(), schema.hash(), &self.config, seed)?;
            let ex = split.eval.x.select_columns(&cols);
            for (row, gold) in ex.iter_rows().zip(split.eval.stage1_labels()) {
                pairs.push((forest.predict(row)? == CONCEPT_CLASS, gold == CONCEPT_CLASS));
            }
        }
        Ok(score(&pairs)?.f1)
    }

    fn check(&self) -> Result<Vec<FeatureFamily>> {
        let fams = self.families();
        if fams.len() < 2 {
            return Err(Error::InvalidArgument("ablation needs at least two feature families".into()));
        }
        Ok(fams)
    }

    /// Baseline F1 minus the F1 after retraining without each family.
    pub fn drop_one_importance(&self) -> Result<ImportanceReport> {
        let fams = self.check()?;
        let baseline = self.f1_with(&fams)?;
        let mut deltas = Vec::new();
        for &f in &fams {
            let rest: Vec<FeatureFamily> = fams.iter().copied().filter(|&g| g != f).collect();
            deltas.push((f, baseline - self.f1_with(&rest)?));
        }
        deltas.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ImportanceReport { baseline, deltas })
    }

    /// Repeatedly removes the family whose removal raises F1 the most, until
    /// no removal beats the current F1 by more than [`ELIMINATION_EPSILON`].
    pub fn backward_elimination(&self) -> Result<Elimination> {
        let mut kept = self.check()?;
        let mut current = self.f1_with(&kept)?;
        let mut trace = Vec::new();
        while kept.len() > 1 {
            let mut candidates = Vec::new();
            for &f in &kept {
                let rest: Vec<FeatureFamily> = kept.iter().copied().filter(|&g| g != f).collect();
                candidates.push((f, self.f1_with(&rest)?));
            }
            let best = candidates
                .iter()
                .copied()
                .fold(None, |acc: Option<(FeatureFamily, f64)>, c| match acc {
                    Some(a) if a.1 >= c.1 => Some(a),
                    _ => Some(c),
                })
                .expect("at least two candidates");
            let removed = (best.1 > current + ELIMINATION_EPSILON).then_some(best.0);
            trace.push(EliminationRound { baseline: current, candidates, removed });
            match removed {
                Some(f) => {
                    kept.retain(|&g| g != f);
                    current = best.1;
                }
                None => break,
            }
        }
        Ok(Elimination { kept, final_f1: current, trace })
    }
}

/// Improvement a removal must exceed to count.
pub const ELIMINATION_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub baseline: f64,
    /// Largest drop first.
    pub deltas: Vec<(FeatureFamily, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationRound {
    pub baseline: f64,
    pub candidates: Vec<(FeatureFamily, f64)>,
    pub removed: Option<FeatureFamily>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    pub kept: Vec<FeatureFamily>,
    pub final_f1: f64,
    pub trace: Vec<EliminationRound>,
}
