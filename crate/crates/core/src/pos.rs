//! Coarse part-of-speech tags and the providers that produce them.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::Verbatim;
use crate::error::{Error, Result};

/// Twelve coarse tags plus `None` for "no token here".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    X,
    Punct,
    None,
}

impl PosTag {
    /// Width of a one-hot tag block.
    pub const COUNT: usize = 13;

    pub const ALL: [PosTag; PosTag::COUNT] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Conj,
        PosTag::Prt,
        PosTag::X,
        PosTag::Punct,
        PosTag::None,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Conj => "CONJ",
            PosTag::Prt => "PRT",
            PosTag::X => "X",
            PosTag::Punct => "PUNCT",
            PosTag::None => "NONE",
        }
    }

    /// Accepts coarse names and Penn Treebank tags.
    pub fn from_label(label: &str) -> PosTag {
        if let Some(t) = PosTag::ALL.iter().find(|t| t.as_str().eq_ignore_ascii_case(label)) {
            return *t;
        }
        let upper = label.to_ascii_uppercase();
        let l = upper.as_str();
        match l {
            "CC" => PosTag::Conj,
            "CD" => PosTag::Num,
            "DT" | "PDT" | "WDT" | "EX" => PosTag::Det,
            "IN" => PosTag::Adp,
            "MD" => PosTag::Verb,
            "PRP" | "PRP$" | "WP" | "WP$" => PosTag::Pron,
            "RP" | "TO" | "POS" => PosTag::Prt,
            "UH" | "FW" | "SYM" | "LS" => PosTag::X,
            _ if l.starts_with("NN") => PosTag::Noun,
            _ if l.starts_with("VB") => PosTag::Verb,
            _ if l.starts_with("JJ") => PosTag::Adj,
            _ if l.starts_with("RB") || l == "WRB" => PosTag::Adv,
            _ if !l.is_empty() && l.chars().all(|c| !c.is_alphanumeric()) => PosTag::Punct,
            "-LRB-" | "-RRB-" => PosTag::Punct,
            _ => PosTag::X,
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Anything that can tag a verbatim, one tag per token.
pub trait TagProvider: Sync {
    fn tag(&self, verbatim: &Verbatim) -> Result<Vec<PosTag>>;
}

const CLOSED_CLASS: &[(&str, PosTag)] = &[
    ("a", PosTag::Det),
    ("an", PosTag::Det),
    ("the", PosTag::Det),
    ("this", PosTag::Det),
    ("that", PosTag::Det),
    ("these", PosTag::Det),
    ("those", PosTag::Det),
    ("each", PosTag::Det),
    ("every", PosTag::Det),
    ("any", PosTag::Det),
    ("some", PosTag::Det),
    ("no", PosTag::Det),
    ("i", PosTag::Pron),
    ("he", PosTag::Pron),
    ("she", PosTag::Pron),
    ("it", PosTag::Pron),
    ("we", PosTag::Pron),
    ("they", PosTag::Pron),
    ("you", PosTag::Pron),
    ("him", PosTag::Pron),
    ("her", PosTag::Pron),
    ("them", PosTag::Pron),
    ("his", PosTag::Pron),
    ("its", PosTag::Pron),
    ("their", PosTag::Pron),
    ("my", PosTag::Pron),
    ("our", PosTag::Pron),
    ("in", PosTag::Adp),
    ("on", PosTag::Adp),
    ("at", PosTag::Adp),
    ("of", PosTag::Adp),
    ("for", PosTag::Adp),
    ("with", PosTag::Adp),
    ("from", PosTag::Adp),
    ("by", PosTag::Adp),
    ("under", PosTag::Adp),
    ("over", PosTag::Adp),
    ("after", PosTag::Adp),
    ("before", PosTag::Adp),
    ("during", PosTag::Adp),
    ("into", PosTag::Adp),
    ("per", PosTag::Adp),
    ("near", PosTag::Adp),
    ("and", PosTag::Conj),
    ("or", PosTag::Conj),
    ("but", PosTag::Conj),
    ("nor", PosTag::Conj),
    ("to", PosTag::Prt),
    ("not", PosTag::Prt),
    ("up", PosTag::Prt),
    ("is", PosTag::Verb),
    ("are", PosTag::Verb),
    ("was", PosTag::Verb),
    ("were", PosTag::Verb),
    ("be", PosTag::Verb),
    ("been", PosTag::Verb),
    ("has", PosTag::Verb),
    ("have", PosTag::Verb),
    ("had", PosTag::Verb),
    ("do", PosTag::Verb),
    ("does", PosTag::Verb),
    ("did", PosTag::Verb),
    ("will", PosTag::Verb),
    ("can", PosTag::Verb),
    ("states", PosTag::Verb),
];

/// Lexicon lookup with suffix fallbacks: numbers are `NUM`, `-ed` is `VERB`,
/// `-ly` is `ADV`, anything else `NOUN`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineTagger {
    lexicon: BTreeMap<String, PosTag>,
}

impl Default for BaselineTagger {
    fn default() -> Self {
        BaselineTagger {
            lexicon: CLOSED_CLASS.iter().map(|(w, t)| (w.to_string(), *t)).collect(),
        }
    }
}

impl BaselineTagger {
    pub fn empty() -> Self {
        BaselineTagger {
            lexicon: BTreeMap::new(),
        }
    }

    /// Adds or overrides most-frequent-tag entries.
    pub fn with_entries<I, S>(mut self, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, PosTag)>,
        S: Into<String>,
    {
        for (w, t) in entries {
            self.lexicon.insert(w.into(), t);
        }
        self
    }

    pub fn tag_word(&self, word: &str) -> PosTag {
        if !word.is_empty() && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
            && word.chars().any(|c| c.is_ascii_digit())
        {
            return PosTag::Num;
        }
        if let Some(t) = self.lexicon.get(word) {
            return *t;
        }
        if word.chars().count() > 3 && word.ends_with("ed") {
            return PosTag::Verb;
        }
        if word.chars().count() > 3 && word.ends_with("ly") {
            return PosTag::Adv;
        }
        if word.chars().all(|c| !c.is_alphanumeric()) {
            return PosTag::Punct;
        }
        PosTag::Noun
    }
}

impl TagProvider for BaselineTagger {
    fn tag(&self, verbatim: &Verbatim) -> Result<Vec<PosTag>> {
        Ok(verbatim.norms().map(|w| self.tag_word(w)).collect())
    }
}

/// Tags produced by an outside tagger, keyed by verbatim id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExternalTags {
    pub tags: BTreeMap<String, Vec<PosTag>>,
}

impl ExternalTags {
    pub fn insert(&mut self, verbatim_id: impl Into<String>, tags: Vec<PosTag>) {
        self.tags.insert(verbatim_id.into(), tags);
    }
}

impl TagProvider for ExternalTags {
    fn tag(&self, verbatim: &Verbatim) -> Result<Vec<PosTag>> {
        let tags = self
            .tags
            .get(&verbatim.id)
            .ok_or_else(|| Error::MissingTags(verbatim.id.clone()))?;
        if tags.len() != verbatim.len() {
            return Err(Error::TagLengthMismatch {
                verbatim_id: verbatim.id.clone(),
                expected: verbatim.len(),
                found: tags.len(),
            });
        }
        Ok(tags.clone())
    }
}
