//! External word lists: dictionary, seed ontology, abbreviations, sense
//! counts and stop/noise words.
//!
//! Parsers take file contents plus a source name so errors can point at
//! `file:line`; reading the files is the caller's job.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{tokenize, MAX_NGRAM};
use crate::error::{Error, Result};
use crate::rng::fnv1a;

/// Sense counts above this are clamped when choosing the number of clusters.
pub const DEFAULT_SENSE_CAP: u32 = 10;

fn parse_error(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Normalizes a phrase the same way verbatims are tokenized.
pub fn normalize_phrase(phrase: &str) -> String {
    let norms: Vec<String> = tokenize(phrase).into_iter().map(|t| t.norm).collect();
    norms.join(" ")
}

fn single_word(source_name: &str, line_no: usize, line: &str) -> Result<String> {
    let toks = tokenize(line);
    if toks.len() != 1 {
        return Err(parse_error(
            source_name,
            line_no,
            alloc::format!("expected a single word, got {:?}", line.trim()),
        ));
    }
    Ok(toks.into_iter().next().map(|t| t.norm).unwrap_or_default())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    pub entries: BTreeSet<String>,
}

impl Dictionary {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = BTreeSet::new();
        for (no, line) in content_lines(text) {
            entries.insert(single_word(source_name, no, line)?);
        }
        Ok(Dictionary { entries })
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Dictionary {
            entries: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptType(String);

impl ConceptType {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.trim().is_empty() || label.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(alloc::format!(
                "invalid concept type label {label:?}"
            )));
        }
        Ok(ConceptType(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The default type labels, `A`, `B`, `C`.
pub fn default_types() -> Vec<ConceptType> {
    ["A", "B", "C"]
        .iter()
        .map(|s| ConceptType(s.to_string()))
        .collect()
}

/// The incomplete phrase-to-type mapping that drives weak labeling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedOntology {
    concepts: BTreeMap<String, ConceptType>,
    types: Vec<ConceptType>,
    unigrams: BTreeSet<String>,
}

impl SeedOntology {
    pub fn new(types: Vec<ConceptType>) -> Self {
        SeedOntology {
            concepts: BTreeMap::new(),
            types,
            unigrams: BTreeSet::new(),
        }
    }

    /// Parses `<phrase>\t<type>` lines. Types outside `types` are rejected.
    pub fn parse(text: &str, source_name: &str, types: Vec<ConceptType>) -> Result<Self> {
        let mut onto = SeedOntology::new(types);
        for (no, line) in content_lines(text) {
            let mut cols = line.split('\t');
            let (Some(phrase), Some(label), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(parse_error(source_name, no, "expected `<phrase>\\t<type>`"));
            };
            let ty = ConceptType::new(label.trim())
                .map_err(|e| parse_error(source_name, no, alloc::format!("{e}")))?;
            onto.insert(phrase, ty).map_err(|e| match e {
                Error::InvalidArgument(m) => parse_error(source_name, no, m),
                other => other,
            })?;
        }
        Ok(onto)
    }

    /// Adds a concept. Re-adding with the same type is a no-op.
    pub fn insert(&mut self, phrase: &str, ty: ConceptType) -> Result<()> {
        let norm = normalize_phrase(phrase);
        let n = norm.split(' ').filter(|w| !w.is_empty()).count();
        if n == 0 || n > MAX_NGRAM {
            return Err(Error::InvalidArgument(alloc::format!(
                "concept phrase {phrase:?} must have 1..={MAX_NGRAM} tokens"
            )));
        }
        if !self.types.contains(&ty) {
            return Err(Error::InvalidArgument(alloc::format!(
                "unknown concept type {ty} for {phrase:?}"
            )));
        }
        if let Some(existing) = self.concepts.get(&norm) {
            if *existing != ty {
                return Err(Error::ConflictingConceptType {
                    phrase: norm,
                    first: existing.to_string(),
                    second: ty.to_string(),
                });
            }
            return Ok(());
        }
        for w in norm.split(' ') {
            self.unigrams.insert(w.to_string());
        }
        self.concepts.insert(norm, ty);
        Ok(())
    }

    pub fn get(&self, phrase: &str) -> Option<&ConceptType> {
        self.concepts.get(phrase)
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.concepts.contains_key(phrase)
    }

    /// Whether `word` is a 1-gram constituent of any concept phrase.
    pub fn has_unigram(&self, word: &str) -> bool {
        self.unigrams.contains(word)
    }

    pub fn unigrams(&self) -> &BTreeSet<String> {
        &self.unigrams
    }

    pub fn concepts(&self) -> &BTreeMap<String, ConceptType> {
        &self.concepts
    }

    pub fn types(&self) -> &[ConceptType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut buf = String::new();
        for t in &self.types {
            buf.push_str(t.as_str());
            buf.push('\u{1f}');
        }
        for (p, t) in &self.concepts {
            buf.push_str(p);
            buf.push('\t');
            buf.push_str(t.as_str());
            buf.push('\n');
        }
        fnv1a(buf.as_bytes())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbbreviationDict {
    pub expansions: BTreeMap<String, Vec<String>>,
}

impl AbbreviationDict {
    /// Parses `<abbr>\t<ff_1>|<ff_2>|...` lines.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut dict = AbbreviationDict::default();
        for (no, line) in content_lines(text) {
            let Some((abbr, forms)) = line.split_once('\t') else {
                return Err(parse_error(source_name, no, "expected `<abbr>\\t<ff_1>|<ff_2>|...`"));
            };
            let abbr = single_word(source_name, no, abbr)?;
            let mut list: Vec<String> = Vec::new();
            for ff in forms.split('|') {
                let ff = normalize_phrase(ff);
                if ff.is_empty() {
                    return Err(parse_error(source_name, no, "empty full form"));
                }
                if !list.contains(&ff) {
                    list.push(ff);
                }
            }
            let entry = dict.expansions.entry(abbr).or_default();
            for ff in list {
                if !entry.contains(&ff) {
                    entry.push(ff);
                }
            }
        }
        Ok(dict)
    }

    pub fn insert(&mut self, abbr: &str, forms: &[&str]) {
        let entry = self.expansions.entry(abbr.to_lowercase()).or_default();
        for f in forms {
            let f = normalize_phrase(f);
            if !f.is_empty() && !entry.contains(&f) {
                entry.push(f);
            }
        }
    }

    pub fn get(&self, abbr: &str) -> Option<&[String]> {
        self.expansions.get(abbr).map(Vec::as_slice)
    }

    pub fn contains(&self, abbr: &str) -> bool {
        self.expansions.contains_key(abbr)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SenseLexicon {
    pub sense_count: BTreeMap<String, u32>,
}

impl SenseLexicon {
    /// Parses `<lemma>\t<count>` lines; counts must be positive.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut lex = SenseLexicon::default();
        for (no, line) in content_lines(text) {
            let Some((lemma, count)) = line.split_once('\t') else {
                return Err(parse_error(source_name, no, "expected `<lemma>\\t<count>`"));
            };
            let count: u32 = count
                .trim()
                .parse()
                .map_err(|_| parse_error(source_name, no, alloc::format!("bad count {count:?}")))?;
            if count == 0 {
                return Err(parse_error(source_name, no, "sense count must be >= 1"));
            }
            lex.sense_count.insert(lemma.trim().to_lowercase(), count);
        }
        Ok(lex)
    }

    pub fn get(&self, lemma: &str) -> Option<u32> {
        self.sense_count.get(lemma).copied()
    }
}

/// Number of senses for a collocate, clamped to `1..=cap`.
///
/// Multi-grams are looked up underscore-joined (`fuel_pump`), falling back to
/// the largest count among their 1-grams. Unknown words count as one sense.
pub fn sense_count_for(collocate: &str, lex: &SenseLexicon, cap: u32) -> u32 {
    let cap = cap.max(1);
    let words: Vec<&str> = collocate.split_whitespace().collect();
    let raw = match words.len() {
        0 => 1,
        1 => lex.get(words[0]).unwrap_or(1),
        _ => {
            let joined = words.join("_");
            lex.get(&joined).unwrap_or_else(|| {
                words
                    .iter()
                    .map(|w| lex.get(w).unwrap_or(1))
                    .max()
                    .unwrap_or(1)
            })
        }
    };
    raw.clamp(1, cap)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopNoiseLists {
    pub stop_words: BTreeSet<String>,
    pub noise_words: BTreeSet<String>,
}

impl StopNoiseLists {
    pub fn parse(stop_text: &str, stop_source: &str, noise_text: &str, noise_source: &str) -> Result<Self> {
        Ok(StopNoiseLists {
            stop_words: Dictionary::parse(stop_text, stop_source)?.entries,
            noise_words: Dictionary::parse(noise_text, noise_source)?.entries,
        })
    }

    pub fn excludes(&self, word: &str) -> bool {
        self.stop_words.contains(word) || self.noise_words.contains(word)
    }
}

/// `word` is in the dictionary or is a 1-gram of some seed concept.
pub fn is_correct(word: &str, dict: &Dictionary, onto: &SeedOntology) -> bool {
    dict.contains(word) || onto.has_unigram(word)
}

/// Every list the pipeline reads, loaded once and shared read-only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicons {
    pub dictionary: Dictionary,
    pub ontology: SeedOntology,
    pub abbreviations: AbbreviationDict,
    pub senses: SenseLexicon,
    pub stop_noise: StopNoiseLists,
}

impl Lexicons {
    pub fn is_correct(&self, word: &str) -> bool {
        is_correct(word, &self.dictionary, &self.ontology)
    }

    /// Fingerprint over everything that influences features and labels.
    pub fn fingerprint(&self) -> u64 {
        let mut buf = alloc::format!("{:016x}\n", self.ontology.fingerprint());
        for w in &self.stop_noise.stop_words {
            buf.push_str(w);
            buf.push('\n');
        }
        buf.push('\u{1e}');
        for w in &self.stop_noise.noise_words {
            buf.push_str(w);
            buf.push('\n');
        }
        buf.push('\u{1e}');
        for (w, c) in &self.senses.sense_count {
            buf.push_str(&alloc::format!("{w}\t{c}\n"));
        }
        fnv1a(buf.as_bytes())
    }
}
