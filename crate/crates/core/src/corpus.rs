//! Verbatims, tokens, n-gram collocates and corpus-level counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

/// Longest collocate the pipeline considers.
pub const MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// The piece of raw text this token came from, punctuation included.
    pub surface: String,
    /// Lowercased, punctuation-stripped form. Never empty, never contains
    /// whitespace.
    pub norm: String,
    pub position: usize,
    /// A period or semicolon followed this token; n-grams never extend past it.
    pub sentence_end: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>, norm: impl Into<String>, position: usize) -> Self {
        Token {
            surface: surface.into(),
            norm: norm.into(),
            position,
            sentence_end: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verbatim {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<Token>,
}

impl Verbatim {
    /// Tokenizes `raw_text`.
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text);
        Verbatim {
            id: id.into(),
            raw_text,
            tokens,
        }
    }

    /// Builds a verbatim from an already-edited token list, renumbering
    /// positions and regenerating the text rendering.
    pub fn from_tokens(id: impl Into<String>, mut tokens: Vec<Token>) -> Self {
        for (i, t) in tokens.iter_mut().enumerate() {
            t.position = i;
        }
        let raw_text = render(&tokens);
        Verbatim {
            id: id.into(),
            raw_text,
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn norms(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().map(|t| t.norm.as_str())
    }

    /// Space-joined norms of `start..start + n`.
    pub fn phrase(&self, start: usize, n: usize) -> String {
        join_norms(&self.tokens[start..start + n])
    }

    /// Normalized text with sentence boundaries written back as ` .`.
    pub fn normalized_text(&self) -> String {
        render(&self.tokens)
    }

    /// Maximal runs of tokens that contain no sentence boundary.
    pub fn segments(&self) -> Vec<Range<usize>> {
        segments(&self.tokens)
    }

    /// Whether the span `start..start + n` stays inside one segment.
    pub fn span_in_segment(&self, start: usize, n: usize) -> bool {
        n > 0
            && start + n <= self.tokens.len()
            && self.tokens[start..start + n - 1]
                .iter()
                .all(|t| !t.sentence_end)
    }

    /// Finds every start index at which the token norms equal `words`.
    pub fn find_phrase(&self, words: &[&str]) -> Vec<usize> {
        if words.is_empty() || words.len() > self.tokens.len() {
            return Vec::new();
        }
        (0..=self.tokens.len() - words.len())
            .filter(|&s| {
                self.tokens[s..s + words.len()]
                    .iter()
                    .zip(words)
                    .all(|(t, w)| t.norm == *w)
            })
            .collect()
    }

    pub fn collocate(&self, start: usize, n: usize) -> Collocate {
        Collocate {
            verbatim_id: self.id.clone(),
            start,
            n,
            phrase: self.phrase(start, n),
        }
    }
}

fn join_norms(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.norm);
    }
    out
}

fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.norm);
        if t.sentence_end {
            out.push_str(" .");
        }
    }
    out
}

/// A contiguous n-gram inside one verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Collocate {
    pub verbatim_id: String,
    pub start: usize,
    pub n: usize,
    pub phrase: String,
}

impl Collocate {
    pub fn end(&self) -> usize {
        self.start + self.n
    }

    pub fn overlaps(&self, start: usize, n: usize) -> bool {
        self.start < start + n && start < self.end()
    }
}

fn is_boundary_char(c: char) -> bool {
    c == '.' || c == ';'
}

/// Splits `raw_text` into tokens.
///
/// Pieces are whitespace-separated; leading and trailing punctuation is
/// stripped (internal characters such as `/`, `-`, `&` survive) and the rest
/// is lowercased. A `.` or `;` among the stripped trailing characters, or a
/// piece consisting only of such punctuation, marks a sentence boundary after
/// the preceding token.
pub fn tokenize(raw_text: &str) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    for piece in raw_text.split_whitespace() {
        let stripped = piece.trim_matches(|c: char| !c.is_alphanumeric());
        if stripped.is_empty() {
            if piece.chars().any(is_boundary_char) {
                if let Some(last) = tokens.last_mut() {
                    last.sentence_end = true;
                }
            }
            continue;
        }
        let lead = piece.len() - piece.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
        let trailing = &piece[lead + stripped.len()..];
        let position = tokens.len();
        tokens.push(Token {
            surface: piece.to_string(),
            norm: stripped.to_lowercase(),
            position,
            sentence_end: trailing.chars().any(is_boundary_char),
        });
    }
    tokens
}

/// Boundary-free runs of a token sequence.
pub fn segments(tokens: &[Token]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.sentence_end {
            out.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(start..tokens.len());
    }
    out
}

/// `(start, n)` for every span of length `1..=max_n` that stays inside one
/// segment, ordered by start then length.
pub fn spans(tokens: &[Token], max_n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for seg in segments(tokens) {
        for start in seg.clone() {
            for n in 1..=max_n {
                if start + n > seg.end {
                    break;
                }
                out.push((start, n));
            }
        }
    }
    out
}

/// Every collocate of length `1..=max_n` (capped at [`MAX_NGRAM`]).
pub fn extract_ngrams(verbatim: &Verbatim, max_n: usize) -> Vec<Collocate> {
    let max_n = max_n.clamp(1, MAX_NGRAM);
    spans(&verbatim.tokens, max_n)
        .into_iter()
        .map(|(s, n)| verbatim.collocate(s, n))
        .collect()
}

/// Term and document frequencies of every collocate phrase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub term_freq: BTreeMap<String, u64>,
    pub doc_freq: BTreeMap<String, u64>,
    pub total_docs: u64,
}

impl CorpusStats {
    pub fn build(corpus: &[Verbatim], max_n: usize) -> Self {
        let mut stats = CorpusStats::default();
        for v in corpus {
            stats.add_verbatim(v, max_n);
        }
        stats
    }

    pub fn add_verbatim(&mut self, verbatim: &Verbatim, max_n: usize) {
        let max_n = max_n.clamp(1, MAX_NGRAM);
        let mut seen = BTreeSet::new();
        for (s, n) in spans(&verbatim.tokens, max_n) {
            let phrase = verbatim.phrase(s, n);
            *self.term_freq.entry(phrase.clone()).or_insert(0) += 1;
            seen.insert(phrase);
        }
        for phrase in seen {
            *self.doc_freq.entry(phrase).or_insert(0) += 1;
        }
        self.total_docs += 1;
    }

    /// Element-wise sum; stats of a union of disjoint corpora.
    pub fn merge(&mut self, other: &CorpusStats) {
        for (k, v) in &other.term_freq {
            *self.term_freq.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.doc_freq {
            *self.doc_freq.entry(k.clone()).or_insert(0) += v;
        }
        self.total_docs += other.total_docs;
    }

    pub fn tf(&self, phrase: &str) -> u64 {
        self.term_freq.get(phrase).copied().unwrap_or(0)
    }

    pub fn df(&self, phrase: &str) -> u64 {
        self.doc_freq.get(phrase).copied().unwrap_or(0)
    }
}

/// Builds stats over `corpus` and returns them; same as [`CorpusStats::build`].
pub fn build_stats(corpus: &[Verbatim], max_n: usize) -> CorpusStats {
    CorpusStats::build(corpus, max_n)
}

/// The 1-grams of every verbatim that contains `phrase`, minus the 1-grams of
/// `phrase` itself.
pub fn cooccurring_unigrams(corpus: &[Verbatim], phrase: &str) -> BTreeSet<String> {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    let mut out = BTreeSet::new();
    if words.is_empty() {
        return out;
    }
    for v in corpus {
        if v.find_phrase(&words).is_empty() {
            continue;
        }
        for t in &v.tokens {
            if !words.contains(&t.norm.as_str()) {
                out.insert(t.norm.clone());
            }
        }
    }
    out
}
