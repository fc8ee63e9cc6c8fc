//! Repairs noisy verbatims: white-space merges, run-on splits, spelling
//! correction and abbreviation expansion, applied in that order.
//!
//! A 1-gram is "correct" when it is in the dictionary or is a constituent of
//! a seed concept. Abbreviation keys and purely numeric tokens are never
//! treated as misspellings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::corpus::{cooccurring_unigrams, CorpusStats, Token, Verbatim};
use crate::embeddings::EmbeddingTable;
use crate::lexicon::Lexicons;
use crate::math;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    Misspell,
    RunOn,
    Whitespace,
    Abbrev,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Misspell => "misspell",
            Step::RunOn => "runon",
            Step::Whitespace => "whitespace",
            Step::Abbrev => "abbrev",
        }
    }

    pub fn parse(s: &str) -> Option<Step> {
        match s {
            "misspell" => Some(Step::Misspell),
            "runon" => Some(Step::RunOn),
            "whitespace" => Some(Step::Whitespace),
            "abbrev" => Some(Step::Abbrev),
            _ => None,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One edit. `position` indexes the token sequence as it was when the edit
/// was applied; `before`/`after` are space-joined norms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub step: Step,
    pub position: usize,
    pub before: String,
    pub after: String,
}

pub type CorrectionLog = Vec<Correction>;

/// Re-applies `log` to a norm sequence. Returns `None` if an entry does not
/// match the tokens it claims to replace.
pub fn replay_log(norms: &[String], log: &[Correction]) -> Option<Vec<String>> {
    let mut cur: Vec<String> = norms.to_vec();
    for c in log {
        let before: Vec<&str> = c.before.split(' ').collect();
        let end = c.position + before.len();
        if end > cur.len() || cur[c.position..end].iter().zip(&before).any(|(a, b)| a != b) {
            return None;
        }
        let after: Vec<String> = c.after.split(' ').map(str::to_string).collect();
        cur.splice(c.position..end, after);
    }
    Some(cur)
}

fn is_numeric(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| c.is_ascii_digit())
}

/// Misspelling and run-on repair, with the candidate alphabet precomputed.
#[derive(Debug, Clone)]
pub struct Speller<'a> {
    lex: &'a Lexicons,
    alphabet: Vec<char>,
}

impl<'a> Speller<'a> {
    pub fn new(lex: &'a Lexicons) -> Self {
        let mut chars = BTreeSet::new();
        for w in lex.dictionary.entries.iter().chain(lex.ontology.unigrams()) {
            chars.extend(w.chars());
        }
        Speller {
            lex,
            alphabet: chars.into_iter().collect(),
        }
    }

    pub fn is_correct(&self, word: &str) -> bool {
        self.lex.is_correct(word)
    }

    /// Words the repair steps leave alone even though they are not correct.
    pub fn is_exempt(&self, word: &str) -> bool {
        is_numeric(word) || self.lex.abbreviations.contains(word)
    }

    /// Correct words at edit distance exactly 1, sorted.
    pub fn candidates(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = BTreeSet::new();
        let mut consider = |cand: String| {
            if cand != word && !cand.is_empty() && self.is_correct(&cand) {
                out.insert(cand);
            }
        };
        for i in 0..chars.len() {
            let mut c = chars.clone();
            c.remove(i);
            consider(c.into_iter().collect());
        }
        for i in 0..=chars.len() {
            for &a in &self.alphabet {
                let mut c = chars.clone();
                c.insert(i, a);
                consider(c.into_iter().collect());
            }
        }
        for i in 0..chars.len() {
            for &a in &self.alphabet {
                if a == chars[i] {
                    continue;
                }
                let mut c = chars.clone();
                c[i] = a;
                consider(c.into_iter().collect());
            }
        }
        out.into_iter().collect()
    }

    /// Best distance-1 correction, or `word` itself when there is none.
    ///
    /// With several candidates each scores `ln(tf(c)) * cos(word, c)`; a
    /// candidate absent from the corpus scores `-inf`. Ties go to the
    /// lexicographically smallest candidate.
    pub fn correct_misspelling(&self, word: &str, stats: &CorpusStats, emb: &EmbeddingTable) -> String {
        let candidates = self.candidates(word);
        match candidates.len() {
            0 => return word.to_string(),
            1 => return candidates.into_iter().next().unwrap_or_default(),
            _ => {}
        }
        let mut best: Option<(f64, &String)> = None;
        for c in &candidates {
            let score = misspelling_score(word, c, stats, emb);
            let better = match best {
                None => true,
                Some((b, _)) => score.total_cmp(&b) == Ordering::Greater,
            };
            if better {
                best = Some((score, c));
            }
        }
        best.map(|(_, c)| c.clone()).unwrap_or_else(|| word.to_string())
    }

    /// Every split point (in chars) where both halves are correct.
    pub fn valid_splits(&self, word: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (idx, _) in word.char_indices().skip(1) {
            let (l, r) = word.split_at(idx);
            if self.is_correct(l) && self.is_correct(r) {
                out.push((l.to_string(), r.to_string()));
            }
        }
        out
    }

    /// Splits a run-on word in two, or returns it unchanged.
    ///
    /// Among several valid splits the one whose halves reach the highest
    /// cosine with the whole word wins; ties go to the earliest split.
    pub fn split_runon(&self, word: &str, emb: &EmbeddingTable) -> Vec<String> {
        let splits = self.valid_splits(word);
        if splits.len() == 1 {
            let (l, r) = splits.into_iter().next().unwrap_or_default();
            return vec![l, r];
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, (l, r)) in splits.iter().enumerate() {
            let score = emb.similarity(word, l).max(emb.similarity(word, r));
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, i));
            }
        }
        match best {
            Some((_, i)) => {
                let (l, r) = splits[i].clone();
                vec![l, r]
            }
            None => vec![word.to_string()],
        }
    }

    /// `left + right` when both are incorrect and the concatenation is
    /// correct.
    pub fn merge_whitespace(&self, left: &str, right: &str) -> Option<String> {
        if self.is_correct(left) || self.is_correct(right) {
            return None;
        }
        let merged = alloc::format!("{left}{right}");
        self.is_correct(&merged).then_some(merged)
    }

    /// Steps 1-3 on one verbatim.
    pub fn repair(
        &self,
        verbatim: &Verbatim,
        stats: &CorpusStats,
        emb: &EmbeddingTable,
    ) -> (Verbatim, CorrectionLog) {
        let mut log = CorrectionLog::new();
        let tokens = &verbatim.tokens;

        let mut merged: Vec<Token> = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            let t = &tokens[i];
            if i + 1 < tokens.len() && !t.sentence_end {
                let r = &tokens[i + 1];
                if !self.is_exempt(&t.norm) && !self.is_exempt(&r.norm) {
                    if let Some(m) = self.merge_whitespace(&t.norm, &r.norm) {
                        log.push(Correction {
                            step: Step::Whitespace,
                            position: merged.len(),
                            before: alloc::format!("{} {}", t.norm, r.norm),
                            after: m.clone(),
                        });
                        merged.push(Token {
                            surface: alloc::format!("{}{}", t.surface, r.surface),
                            norm: m,
                            position: 0,
                            sentence_end: r.sentence_end,
                        });
                        i += 2;
                        continue;
                    }
                }
            }
            merged.push(t.clone());
            i += 1;
        }

        let mut split: Vec<Token> = Vec::with_capacity(merged.len());
        for t in merged {
            if self.is_correct(&t.norm) || self.is_exempt(&t.norm) {
                split.push(t);
                continue;
            }
            let parts = self.split_runon(&t.norm, emb);
            if parts.len() == 2 {
                log.push(Correction {
                    step: Step::RunOn,
                    position: split.len(),
                    before: t.norm.clone(),
                    after: parts.join(" "),
                });
                let end = t.sentence_end;
                split.push(Token::new(parts[0].clone(), parts[0].clone(), 0));
                let mut right = Token::new(parts[1].clone(), parts[1].clone(), 0);
                right.sentence_end = end;
                split.push(right);
            } else {
                split.push(t);
            }
        }

        for (pos, t) in split.iter_mut().enumerate() {
            if self.is_correct(&t.norm) || self.is_exempt(&t.norm) {
                continue;
            }
            let fixed = self.correct_misspelling(&t.norm, stats, emb);
            if fixed != t.norm {
                log.push(Correction {
                    step: Step::Misspell,
                    position: pos,
                    before: t.norm.clone(),
                    after: fixed.clone(),
                });
                t.norm = fixed;
            }
        }

        (Verbatim::from_tokens(verbatim.id.clone(), split), log)
    }
}

fn misspelling_score(word: &str, candidate: &str, stats: &CorpusStats, emb: &EmbeddingTable) -> f64 {
    let tf = stats.tf(candidate);
    if tf == 0 {
        return f64::NEG_INFINITY;
    }
    math::ln(tf as f64) * emb.similarity(word, candidate)
}

pub fn correct_misspelling(word: &str, lex: &Lexicons, stats: &CorpusStats, emb: &EmbeddingTable) -> String {
    Speller::new(lex).correct_misspelling(word, stats, emb)
}

pub fn split_runon(word: &str, lex: &Lexicons, emb: &EmbeddingTable) -> Vec<String> {
    Speller::new(lex).split_runon(word, emb)
}

pub fn merge_whitespace(left: &str, right: &str, lex: &Lexicons) -> Option<String> {
    if lex.is_correct(left) || lex.is_correct(right) {
        return None;
    }
    let merged = alloc::format!("{left}{right}");
    lex.is_correct(&merged).then_some(merged)
}

/// Co-occurrence statistics for one ambiguous abbreviation.
#[derive(Debug, Clone, PartialEq)]
pub struct AbbreviationContext {
    pub abbr: String,
    pub full_forms: Vec<String>,
    pub c_abbr: BTreeSet<String>,
    pub c_n: Vec<BTreeSet<String>>,
    /// Shared context vocabulary, sorted.
    pub v: Vec<String>,
    /// TF-IDF of the abbreviation over `v`.
    pub abbr_tfidf: Vec<f64>,
    /// TF-IDF of each full form over `v`, parallel to `full_forms`.
    pub form_tfidf: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

fn tfidf_over(corpus: &[Verbatim], phrase: &str, vocab: &[String], idf: &[f64]) -> Vec<f64> {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    let slot: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut counts = vec![0u64; vocab.len()];
    for v in corpus {
        if v.find_phrase(&words).is_empty() {
            continue;
        }
        for t in &v.tokens {
            if let Some(&i) = slot.get(t.norm.as_str()) {
                counts[i] += 1;
            }
        }
    }
    counts.iter().zip(idf).map(|(&c, &w)| c as f64 * w).collect()
}

fn doc_count(corpus: &[Verbatim], phrase: &str) -> u64 {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    corpus.iter().filter(|v| !v.find_phrase(&words).is_empty()).count() as u64
}

/// Collects `C_abbr`, each `C_n`, their intersection `V`, TF-IDF vectors over
/// `V` and add-one smoothed document-frequency priors.
///
/// TF is the number of times a context word occurs in verbatims containing
/// the term; IDF is `ln(total_docs / doc_freq)` taken from `stats`.
pub fn build_abbrev_context(
    abbr: &str,
    full_forms: &[String],
    corpus: &[Verbatim],
    stats: &CorpusStats,
) -> AbbreviationContext {
    let c_abbr = cooccurring_unigrams(corpus, abbr);
    let c_n: Vec<BTreeSet<String>> = full_forms
        .iter()
        .map(|ff| cooccurring_unigrams(corpus, ff))
        .collect();
    let mut shared = c_abbr.clone();
    for c in &c_n {
        shared = shared.intersection(c).cloned().collect();
    }
    let v: Vec<String> = shared.into_iter().collect();
    let total = stats.total_docs.max(1) as f64;
    let idf: Vec<f64> = v
        .iter()
        .map(|w| {
            let df = stats.df(w).max(1) as f64;
            math::ln(total / df).max(0.0)
        })
        .collect();
    let abbr_tfidf = tfidf_over(corpus, abbr, &v, &idf);
    let form_tfidf = full_forms.iter().map(|ff| tfidf_over(corpus, ff, &v, &idf)).collect();
    let smoothed: Vec<f64> = full_forms
        .iter()
        .map(|ff| doc_count(corpus, ff) as f64 + 1.0)
        .collect();
    let z: f64 = smoothed.iter().sum();
    AbbreviationContext {
        abbr: abbr.to_string(),
        full_forms: full_forms.to_vec(),
        c_abbr,
        c_n,
        v,
        abbr_tfidf,
        form_tfidf,
        priors: smoothed.iter().map(|s| s / z).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Disambiguation {
    pub chosen: usize,
    pub full_form: String,
    pub posterior: Vec<f64>,
    /// Whether the likelihood was usable; `false` means priors decided.
    pub used_likelihood: bool,
}

/// Log-likelihood of the abbreviation's context under one full form.
fn log_likelihood(abbr: &[f64], form: &[f64]) -> f64 {
    let total: f64 = form.iter().sum();
    let log_total = math::ln(total);
    let mut ll = 0.0;
    for (&a, &f) in abbr.iter().zip(form) {
        if a == 0.0 {
            continue;
        }
        if f == 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += a * (math::ln(f) - log_total);
    }
    ll
}

/// Picks the full form with the largest posterior.
///
/// The likelihood of form `n` is the product over shared context words of
/// `(v_n,i / sum_j v_n,j) ^ v_abbr,i`, evaluated in log space. When `V` is
/// empty, a form has an all-zero vector, or every form has zero likelihood,
/// the priors decide alone. Ties go to the higher prior, then input order.
pub fn disambiguate_abbrev(ctx: &AbbreviationContext) -> Disambiguation {
    let n = ctx.full_forms.len();
    if n <= 1 {
        return Disambiguation {
            chosen: 0,
            full_form: ctx.full_forms.first().cloned().unwrap_or_default(),
            posterior: vec![1.0; n],
            used_likelihood: false,
        };
    }
    let usable = !ctx.v.is_empty()
        && ctx.form_tfidf.iter().all(|row| row.iter().any(|&x| x > 0.0));
    let mut log_post: Vec<f64> = ctx.priors.iter().map(|&p| math::ln(p)).collect();
    let mut used_likelihood = false;
    if usable {
        let lls: Vec<f64> = ctx
            .form_tfidf
            .iter()
            .map(|row| log_likelihood(&ctx.abbr_tfidf, row))
            .collect();
        if lls.iter().any(|l| l.is_finite()) {
            used_likelihood = true;
            for (lp, ll) in log_post.iter_mut().zip(&lls) {
                *lp += ll;
            }
        }
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_post.iter().map(|&lp| math::exp(lp - max)).collect();
    let z: f64 = weights.iter().sum();
    let posterior: Vec<f64> = weights.iter().map(|w| w / z).collect();

    let mut chosen = 0;
    for i in 1..n {
        let (p, q) = (posterior[i], posterior[chosen]);
        if p > q || (p == q && ctx.priors[i] > ctx.priors[chosen]) {
            chosen = i;
        }
    }
    Disambiguation {
        chosen,
        full_form: ctx.full_forms[chosen].clone(),
        posterior,
        used_likelihood,
    }
}

/// Corpus-wide decisions for ambiguous abbreviations, keyed by abbreviation.
pub type AbbreviationChoices = BTreeMap<String, Disambiguation>;

/// Builds a context and a decision for every ambiguous abbreviation that
/// occurs in `corpus` (which should already be repaired by steps 1-3).
pub fn resolve_abbreviations(lex: &Lexicons, corpus: &[Verbatim], stats: &CorpusStats) -> AbbreviationChoices {
    let present: BTreeSet<&str> = corpus.iter().flat_map(|v| v.norms()).collect();
    let mut out = AbbreviationChoices::new();
    for (abbr, forms) in &lex.abbreviations.expansions {
        if forms.len() < 2 || !present.contains(abbr.as_str()) {
            continue;
        }
        let ctx = build_abbrev_context(abbr, forms, corpus, stats);
        out.insert(abbr.clone(), disambiguate_abbrev(&ctx));
    }
    out
}

/// Step 4 on an already repaired verbatim; appends to `log`.
pub fn expand_abbreviations(
    verbatim: &Verbatim,
    lex: &Lexicons,
    choices: &AbbreviationChoices,
    log: &mut CorrectionLog,
) -> Verbatim {
    let mut out: Vec<Token> = Vec::with_capacity(verbatim.tokens.len());
    for t in &verbatim.tokens {
        let replacement = match lex.abbreviations.get(&t.norm) {
            Some([single]) => Some(single.clone()),
            Some(_) => choices.get(&t.norm).map(|d| d.full_form.clone()),
            None => None,
        };
        match replacement {
            Some(form) if !form.is_empty() => {
                log.push(Correction {
                    step: Step::Abbrev,
                    position: out.len(),
                    before: t.norm.clone(),
                    after: form.clone(),
                });
                let words: Vec<&str> = form.split(' ').collect();
                for (k, w) in words.iter().enumerate() {
                    let mut tok = Token::new(*w, *w, 0);
                    tok.sentence_end = k + 1 == words.len() && t.sentence_end;
                    out.push(tok);
                }
            }
            _ => out.push(t.clone()),
        }
    }
    Verbatim::from_tokens(verbatim.id.clone(), out)
}

/// All four steps on one verbatim, using precomputed abbreviation decisions.
pub fn normalize_verbatim(
    verbatim: &Verbatim,
    lex: &Lexicons,
    stats: &CorpusStats,
    emb: &EmbeddingTable,
    choices: &AbbreviationChoices,
) -> (Verbatim, CorrectionLog) {
    let speller = Speller::new(lex);
    let (repaired, mut log) = speller.repair(verbatim, stats, emb);
    let expanded = expand_abbreviations(&repaired, lex, choices, &mut log);
    (expanded, log)
}

#[derive(Debug, Clone)]
pub struct NormalizedCorpus {
    pub verbatims: Vec<Verbatim>,
    pub logs: Vec<CorrectionLog>,
    pub choices: AbbreviationChoices,
}

/// Normalizes a whole corpus: repairs every verbatim, resolves ambiguous
/// abbreviations against the repaired corpus, then expands them.
pub fn normalize_corpus(
    corpus: &[Verbatim],
    lex: &Lexicons,
    stats: &CorpusStats,
    emb: &EmbeddingTable,
) -> NormalizedCorpus {
    let speller = Speller::new(lex);
    let mut repaired = Vec::with_capacity(corpus.len());
    let mut logs = Vec::with_capacity(corpus.len());
    for v in corpus {
        let (r, log) = speller.repair(v, stats, emb);
        repaired.push(r);
        logs.push(log);
    }
    let repaired_stats = CorpusStats::build(&repaired, 1);
    let choices = resolve_abbreviations(lex, &repaired, &repaired_stats);
    let verbatims = repaired
        .iter()
        .zip(logs.iter_mut())
        .map(|(v, log)| expand_abbreviations(v, lex, &choices, log))
        .collect();
    NormalizedCorpus {
        verbatims,
        logs,
        choices,
    }
}
