//! Synthetic maintenance-record corpora with known answers.
//!
//! Verbatims are drawn from templates whose slots take concepts of three
//! types (parts, symptoms, actions). Gold spans are recorded on the clean
//! text, then noise is planted: abbreviations for some multi-word concepts,
//! misspellings, run-on words and split words. Every planted error has a
//! unique repair under the emitted lexicons.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use ontolearn_core::lexicon::{
    default_types, AbbreviationDict, ConceptType, Dictionary, Lexicons, SeedOntology, SenseLexicon, StopNoiseLists,
};
use ontolearn_core::normalize::Speller;
use ontolearn_core::rng::{derive_seed, seeded, Rng as SeededRng};
use rand::distributions::WeightedIndex;
use rand::prelude::*;

use crate::formats::{self, GoldSpan};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct TypePool {
    pub name: String,
    /// Words used only as one-word concepts.
    pub singles: Vec<String>,
    /// Last words of multi-word concepts.
    pub heads: Vec<String>,
    pub modifiers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRates {
    pub misspell: f64,
    pub run_on: f64,
    pub whitespace: f64,
    pub abbreviation: f64,
}

impl NoiseRates {
    pub fn uniform(rate: f64) -> Self {
        NoiseRates { misspell: rate, run_on: rate, whitespace: rate, abbreviation: rate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub pools: Vec<TypePool>,
    pub filler: Vec<String>,
    pub stop_words: Vec<String>,
    /// Space-separated tokens. `{T}` takes a concept of type `T`, `{F}` one
    /// to four filler words, `{N}` a number; `.` and `;` end sentences.
    pub templates: Vec<String>,
    pub n_concepts: usize,
    /// Relative frequency of concept lengths 1 to 4.
    pub length_weights: [f64; 4],
    pub zipf_exponent: f64,
    pub holdout: f64,
    pub noise: NoiseRates,
    pub n_abbreviations: usize,
    pub context_words: usize,
    pub context_rate: f64,
    /// Chance that a verbatim also carries one context word drawn from all
    /// expansions, so context words are characteristic but not exclusive.
    pub context_background: f64,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl Default for SynthSpec {
    fn default() -> Self {
        let pools = vec![
            TypePool {
                name: "A".into(),
                singles: words(
                    "alternator radiator thermostat muffler camshaft crankshaft driveshaft windshield odometer \
                     speedometer tailgate sunroof turbocharger differential flywheel carburetor dipstick \
                     wiper headlamp taillamp manifold spoiler",
                ),
                heads: words(
                    "pump valve relay sensor hose belt gasket filter bearing switch module injector rotor caliper \
                     mount bushing harness connector actuator solenoid seal cable tank cap fan motor bracket \
                     cover pad housing",
                ),
                modifiers: words(
                    "fuel oil water brake coolant transmission intake exhaust steering ignition throttle timing \
                     wheel engine door window seat mirror heater blower axle strut clutch vacuum cylinder \
                     camber tie rocker idler crank",
                ),
            },
            TypePool {
                name: "B".into(),
                singles: words(
                    "misfire stall hesitation overheating rattle squeal shudder vibration leak smoke knock whine \
                     clunk squeak hum grinding drift flicker surge chatter backfire sputter",
                ),
                heads: words("noise smell odor light warning code loss failure drop fluctuation delay pull wobble buzz hiss"),
                modifiers: words(
                    "loud intermittent burning metallic high low constant erratic rough hard excessive sudden \
                     faint sweet sharp slight harsh dim rapid sluggish",
                ),
            },
            TypePool {
                name: "C".into(),
                singles: words(
                    "replaced adjusted tightened cleaned reprogrammed lubricated realigned resealed recalibrated \
                     flushed recharged rebuilt reflashed torqued inspected bled repaired installed resurfaced \
                     balanced",
                ),
                heads: words("software update procedure calibration reset flush alignment repair replacement adjustment diagnosis"),
                modifiers: words(
                    "performed completed applied programmed partial full factory manual dynamic static campaign \
                     recall revised extended",
                ),
            },
        ];
        SynthSpec {
            pools,
            filler: words(
                "customer states technician found verified reports concern dealer vehicle road tested mileage ro \
                 driving highway morning warranty bulletin service visit checked confirmed advised please \
                 operation normal condition during weather parked week days since started occurs sometimes \
                 always owner tech shop appointment returned approved labor parts ordered arrived notes comment \
                 duplicate unable cold hot rain snow city traffic freeway garage driveway trip commute \
                 yesterday today monday friday weekend month recently again twice daily first second last \
                 noticed heard felt saw described claims wants requests asked called towed dropped picked \
                 waiting loaner rental authorization claim invoice estimate quote policy coverage expired \
                 goodwill retail fleet lease dealership advisor manager foreman supervisor \
                 documented photos attached video record history previous prior repeat comeback \
                 test drive idle accelerating braking turning reversing cruising climbing stopping starting \
                 speed mph ambient temperature humidity evening night",
            ),
            stop_words: words(
                "the is and a on at with for per as no from to in of has was that then it after when are be by but or while",
            ),
            templates: [
                "customer states that the {A} is {B} when {F} . {F} .",
                "{F} . customer states a {B} from the {A} after {F} . technician has {C} the {A} . {F} .",
                "{F} . the {A} was {B} at {F} . {C} the {A} and {F} .",
                "verified the {B} on the {A} while {F} ; then {C} the {A} per {F} . {F} .",
                "ro {N} . customer reports a {B} when {F} . {C} the {A} and {C} it . {F} .",
                "{F} {F} . technician found that the {A} has {B} . {A} was {C} .",
                "{F} . {B} . {F} ; {C} . {F} .",
                "the {A} is {B} after {F} ; {C} as per {F} . {F} .",
                "mileage {N} . {F} . the {A} and the {A} are {B} . {F} .",
                "customer concern is {B} in the {A} when {F} . {C} the {A} and {F} .",
                "{F} {F} . {B} with {A} . {F} .",
                "no {B} after {C} the {A} . {F} {F} .",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            n_concepts: 300,
            length_weights: [0.25, 0.35, 0.28, 0.12],
            zipf_exponent: 0.8,
            holdout: 0.3,
            noise: NoiseRates::uniform(0.05),
            n_abbreviations: 10,
            context_words: 3,
            context_rate: 0.8,
            context_background: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let n = &self.noise;
        for (name, r) in [
            ("misspell", n.misspell),
            ("run-on", n.run_on),
            ("whitespace", n.whitespace),
            ("abbreviation", n.abbreviation),
            ("context", self.context_rate),
            ("background context", self.context_background),
        ] {
            ensure!((0.0..=1.0).contains(&r), "{name} rate {r} outside [0, 1]");
        }
        ensure!((0.0..1.0).contains(&self.holdout), "holdout {} outside [0, 1)", self.holdout);
        ensure!(!self.pools.is_empty(), "no concept type pools");
        for p in &self.pools {
            ensure!(
                !p.singles.is_empty() || (!p.heads.is_empty() && !p.modifiers.is_empty()),
                "vocabulary pool for type {} is empty",
                p.name
            );
        }
        ensure!(!self.templates.is_empty(), "no templates");
        ensure!(!self.filler.is_empty(), "filler pool is empty");
        ensure!(self.length_weights.iter().any(|&w| w > 0.0), "all concept length weights are zero");
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for p in &self.pools {
            for w in p.singles.iter().chain(&p.heads).chain(&p.modifiers) {
                if let Some(other) = seen.insert(w, &p.name) {
                    if other != p.name {
                        bail!("word {w:?} appears in pools {other} and {}", p.name);
                    }
                }
            }
        }
        for w in self.filler.iter().chain(&self.stop_words) {
            ensure!(!seen.contains_key(w.as_str()), "word {w:?} is both filler and concept vocabulary");
        }
        for t in &self.templates {
            for tok in t.split_whitespace() {
                if let Some(name) = tok.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                    ensure!(
                        name == "F" || name == "N" || self.pools.iter().any(|p| p.name == name),
                        "template {t:?} uses unknown slot {tok}"
                    );
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub phrase: String,
    pub concept_type: String,
    /// Sampling weight within its type.
    pub weight: f64,
    pub held_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// `(id, raw text)`, noise included.
    pub raw: Vec<(String, String)>,
    /// `(id, clean text)`, the same records before noise.
    pub clean: Vec<(String, String)>,
    /// Concept occurrences in clean token positions.
    pub gold: Vec<GoldSpan>,
    pub concepts: Vec<Concept>,
    pub lexicons: Lexicons,
    /// Abbreviation to the expansion planted for it.
    pub abbreviation_key: BTreeMap<String, String>,
    pub planted: PlantedCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlantedCounts {
    pub misspell: usize,
    pub run_on: usize,
    pub whitespace: usize,
    pub abbreviation: usize,
}

impl SynthCorpus {
    pub fn holdout(&self) -> BTreeSet<&str> {
        self.concepts.iter().filter(|c| c.held_out).map(|c| c.phrase.as_str()).collect()
    }

    pub fn full_ontology(&self) -> String {
        let mut s = String::new();
        for c in &self.concepts {
            s.push_str(&format!("{}\t{}\n", c.phrase, c.concept_type));
        }
        s
    }

    /// Writes the corpus and its answer files:
    ///
    /// * `corpus.tsv` (noisy) and `clean_corpus.tsv`
    /// * `gold.tsv`, `full_ontology.tsv`, `holdout.txt`, `abbreviation_key.tsv`
    /// * `lexicons/` with the dictionary, seed ontology, abbreviations,
    ///   sense counts and stop words
    pub fn write(&self, dir: &Path) -> Result<()> {
        let lex = &self.lexicons;
        let ld = dir.join("lexicons");
        let w = |p: &Path, s: &str| write_atomic(p, s.as_bytes());
        w(&ld.join(formats::DICTIONARY_FILE), &formats::render_word_list(&lex.dictionary.entries))?;
        w(&ld.join(formats::ONTOLOGY_FILE), &formats::render_ontology(&lex.ontology))?;
        w(&ld.join(formats::ABBREVIATIONS_FILE), &formats::render_abbreviations(&lex.abbreviations))?;
        w(&ld.join(formats::SENSES_FILE), &formats::render_senses(&lex.senses))?;
        w(&ld.join(formats::STOP_FILE), &formats::render_word_list(&lex.stop_noise.stop_words))?;
        w(&dir.join("corpus.tsv"), &formats::render_raw_corpus(self.raw.iter().map(|(a, b)| (a.as_str(), b.as_str()))))?;
        w(
            &dir.join("clean_corpus.tsv"),
            &formats::render_raw_corpus(self.clean.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
        )?;
        w(&dir.join("gold.tsv"), &formats::render_gold(&self.gold))?;
        w(&dir.join("full_ontology.tsv"), &self.full_ontology())?;
        let holdout: Vec<String> = self.holdout().into_iter().map(str::to_string).collect();
        w(&dir.join("holdout.txt"), &formats::render_word_list(&holdout))?;
        let key: String = self.abbreviation_key.iter().map(|(a, f)| format!("{a}\t{f}\n")).collect();
        w(&dir.join("abbreviation_key.tsv"), &key)
    }
}

#[derive(Debug, Clone)]
struct Tok {
    word: String,
    end: bool,
    /// May receive spelling, run-on or split noise.
    noisy: bool,
}

fn contains_run(hay: &[&str], needle: &[&str]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

fn nests(a: &str, b: &str) -> bool {
    let a: Vec<&str> = a.split(' ').collect();
    let b: Vec<&str> = b.split(' ').collect();
    contains_run(&a, &b) || contains_run(&b, &a)
}

fn make_concepts(spec: &SynthSpec, rng: &mut SeededRng) -> Result<Vec<Concept>> {
    let k = spec.pools.len();
    let lengths = WeightedIndex::new(spec.length_weights).context("concept length weights")?;
    let mut out: Vec<Concept> = Vec::new();
    for (ti, pool) in spec.pools.iter().enumerate() {
        let quota = spec.n_concepts / k + usize::from(ti < spec.n_concepts % k);
        let mut singles = pool.singles.clone();
        singles.shuffle(rng);
        let mut mine: Vec<String> = Vec::new();
        let mut attempts = 0;
        while mine.len() < quota {
            attempts += 1;
            if attempts > 200 * quota + 1000 {
                bail!("vocabulary pool for type {} cannot supply {quota} distinct concepts", pool.name);
            }
            let len = lengths.sample(rng) + 1;
            let phrase = if len == 1 || pool.heads.is_empty() || pool.modifiers.len() < len - 1 {
                match singles.pop() {
                    Some(w) => w,
                    None => continue,
                }
            } else {
                let mut ws: Vec<String> = pool.modifiers.choose_multiple(rng, len - 1).cloned().collect();
                ws.push(pool.heads.choose(rng).cloned().unwrap_or_default());
                ws.join(" ")
            };
            if out.iter().map(|c| &c.phrase).chain(&mine).any(|p| nests(p, &phrase)) {
                continue;
            }
            mine.push(phrase);
        }
        mine.shuffle(rng);
        for (rank, phrase) in mine.into_iter().enumerate() {
            out.push(Concept {
                phrase,
                concept_type: pool.name.clone(),
                weight: 1.0 / ((rank + 1) as f64).powf(spec.zipf_exponent),
                held_out: false,
            });
        }
    }
    let n_hold = (spec.holdout * out.len() as f64).round() as usize;
    let mut idx: Vec<usize> = (0..out.len()).collect();
    idx.shuffle(rng);
    for &i in &idx[..n_hold.min(out.len())] {
        out[i].held_out = true;
    }
    Ok(out)
}

/// Pronounceable made-up words, none of them in `taken`.
fn invent_words(count: usize, taken: &BTreeSet<String>, rng: &mut SeededRng) -> Vec<String> {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut out = BTreeSet::new();
    let mut list = Vec::new();
    while list.len() < count {
        let syl = rng.gen_range(2..=3);
        let w: String = (0..syl)
            .flat_map(|_| [*C.choose(rng).unwrap_or(&b'k') as char, *V.choose(rng).unwrap_or(&b'a') as char])
            .collect();
        if !taken.contains(&w) && out.insert(w.clone()) {
            list.push(w);
        }
    }
    list
}

struct Abbreviations {
    dict: AbbreviationDict,
    /// Expansion phrase to its abbreviation, for planted expansions only.
    planted: BTreeMap<String, String>,
    key: BTreeMap<String, String>,
    context: BTreeMap<String, Vec<String>>,
}

fn make_abbreviations(
    spec: &SynthSpec,
    concepts: &[Concept],
    taken: &mut BTreeSet<String>,
    rng: &mut SeededRng,
) -> Result<Abbreviations> {
    let mut ab = Abbreviations {
        dict: AbbreviationDict::default(),
        planted: BTreeMap::new(),
        key: BTreeMap::new(),
        context: BTreeMap::new(),
    };
    if spec.n_abbreviations == 0 {
        return Ok(ab);
    }
    // Frequent multi-word concepts, so each abbreviation has enough evidence.
    let mut pool: Vec<&Concept> = concepts.iter().filter(|c| c.phrase.contains(' ')).collect();
    pool.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.phrase.cmp(&b.phrase)));
    pool.truncate(spec.n_abbreviations * 3);
    pool.shuffle(rng);
    let mut pool = pool.into_iter();
    for _ in 0..spec.n_abbreviations {
        let k = rng.gen_range(2..=3);
        let forms: Vec<&Concept> = pool.by_ref().take(k).collect();
        if forms.len() < 2 {
            bail!("not enough multi-word concepts for {} abbreviations", spec.n_abbreviations);
        }
        let truth = &forms[0].phrase;
        let mut abbr: String = truth.split(' ').filter_map(|w| w.chars().next()).collect();
        let mut suffix = b'a';
        while taken.contains(&abbr) || ab.dict.contains(&abbr) {
            abbr.push(suffix as char);
            suffix = if suffix == b'z' { b'a' } else { suffix + 1 };
        }
        let refs: Vec<&str> = forms.iter().map(|c| c.phrase.as_str()).collect();
        ab.dict.insert(&abbr, &refs);
        ab.planted.insert(truth.clone(), abbr.clone());
        ab.key.insert(abbr.clone(), truth.clone());
        for f in &forms {
            let ctx = invent_words(spec.context_words, taken, rng);
            taken.extend(ctx.iter().cloned());
            ab.context.insert(f.phrase.clone(), ctx);
        }
    }
    Ok(ab)
}

struct Planter<'a> {
    speller: Speller<'a>,
    lex: &'a Lexicons,
}

impl Planter<'_> {
    fn clean_error(&self, w: &str) -> bool {
        !self.speller.is_correct(w) && !self.speller.is_exempt(w)
    }

    /// A distance-1 edit of `w` whose only correction is `w`.
    fn misspell(&self, w: &str, rng: &mut SeededRng) -> Option<String> {
        let chars: Vec<char> = w.chars().collect();
        for _ in 0..12 {
            let mut c = chars.clone();
            let i = rng.gen_range(0..c.len());
            let letter = (b'a' + rng.gen_range(0..26u8)) as char;
            match rng.gen_range(0..3) {
                0 if c.len() > 3 => {
                    c.remove(i);
                }
                1 => c.insert(i, letter),
                _ => c[i] = letter,
            }
            let m: String = c.into_iter().collect();
            if m != w
                && self.clean_error(&m)
                && self.speller.candidates(&m) == [w.to_string()]
                && self.speller.valid_splits(&m).is_empty()
            {
                return Some(m);
            }
        }
        None
    }

    /// Two halves that are both incorrect.
    fn split(&self, w: &str, rng: &mut SeededRng) -> Option<(String, String)> {
        let idx: Vec<usize> = w.char_indices().map(|(i, _)| i).skip(2).collect();
        let mut cut: Vec<usize> = idx.into_iter().filter(|&i| w.len() - i >= 2).collect();
        cut.shuffle(rng);
        cut.into_iter().map(|i| w.split_at(i)).find_map(|(l, r)| {
            (self.clean_error(l) && self.clean_error(r) && self.speller.candidates(l).is_empty())
                .then(|| (l.to_string(), r.to_string()))
        })
    }

    fn run_on(&self, l: &str, r: &str) -> Option<String> {
        let m = format!("{l}{r}");
        (self.clean_error(&m) && self.speller.valid_splits(&m) == [(l.to_string(), r.to_string())]).then_some(m)
    }

    fn eligible(&self, t: &Tok) -> bool {
        t.noisy
            && t.word.len() >= 4
            && t.word.chars().all(|c| c.is_ascii_lowercase())
            && !self.lex.stop_noise.stop_words.contains(&t.word)
    }

    fn apply(&self, toks: Vec<Tok>, rates: &NoiseRates, rng: &mut SeededRng, counts: &mut PlantedCounts) -> Vec<Tok> {
        let mut out: Vec<Tok> = Vec::with_capacity(toks.len());
        let mut i = 0;
        while i < toks.len() {
            let t = &toks[i];
            if !self.eligible(t) {
                out.push(t.clone());
                i += 1;
                continue;
            }
            let u: f64 = rng.gen();
            if u < rates.misspell {
                if let Some(m) = self.misspell(&t.word, rng) {
                    out.push(Tok { word: m, ..t.clone() });
                    counts.misspell += 1;
                    i += 1;
                    continue;
                }
            } else if u < rates.misspell + rates.run_on {
                if let Some(next) = toks.get(i + 1).filter(|n| !t.end && self.eligible(n)) {
                    if let Some(m) = self.run_on(&t.word, &next.word) {
                        out.push(Tok { word: m, end: next.end, noisy: false });
                        counts.run_on += 1;
                        i += 2;
                        continue;
                    }
                }
            } else if u < rates.misspell + rates.run_on + rates.whitespace {
                if let Some((l, r)) = self.split(&t.word, rng) {
                    out.push(Tok { word: l, end: false, noisy: false });
                    out.push(Tok { word: r, end: t.end, noisy: false });
                    counts.whitespace += 1;
                    i += 1;
                    continue;
                }
            }
            out.push(t.clone());
            i += 1;
        }
        out
    }
}

fn render(toks: &[Tok]) -> String {
    let mut s = String::new();
    for t in toks {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(&t.word);
        if t.end {
            s.push_str(" .");
        }
    }
    s
}

/// Generates `size` verbatims. The same spec, size and seed always give the
/// same output.
pub fn generate(spec: &SynthSpec, size: usize, seed: u64) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = seeded(derive_seed(seed, 0));
    let concepts = make_concepts(spec, &mut rng)?;

    let mut taken: BTreeSet<String> = spec.filler.iter().chain(&spec.stop_words).cloned().collect();
    for p in &spec.pools {
        taken.extend(p.singles.iter().chain(&p.heads).chain(&p.modifiers).cloned());
    }
    let abbrs = make_abbreviations(spec, &concepts, &mut taken, &mut rng)?;

    let types: Vec<ConceptType> = if spec.pools.iter().map(|p| p.name.as_str()).eq(["A", "B", "C"]) {
        default_types()
    } else {
        spec.pools.iter().map(|p| ConceptType::new(p.name.clone())).collect::<ontolearn_core::Result<_>>()?
    };
    let mut ontology = SeedOntology::new(types.clone());
    for c in concepts.iter().filter(|c| !c.held_out) {
        let ty = types.iter().find(|t| t.as_str() == c.concept_type).cloned().context("concept type")?;
        ontology.insert(&c.phrase, ty)?;
    }
    let mut senses = SenseLexicon::default();
    for p in &spec.pools {
        for w in p.singles.iter().chain(&p.heads) {
            if rng.gen_bool(0.3) {
                senses.sense_count.insert(w.clone(), rng.gen_range(2..=3));
            }
        }
    }
    let lexicons = Lexicons {
        dictionary: Dictionary::from_words(taken.iter().map(String::as_str)),
        ontology,
        abbreviations: abbrs.dict.clone(),
        senses,
        stop_noise: StopNoiseLists {
            stop_words: spec.stop_words.iter().cloned().collect(),
            noise_words: BTreeSet::new(),
        },
    };

    let by_type: BTreeMap<&str, (Vec<&Concept>, WeightedIndex<f64>)> = spec
        .pools
        .iter()
        .map(|p| {
            let cs: Vec<&Concept> = concepts.iter().filter(|c| c.concept_type == p.name).collect();
            let w = WeightedIndex::new(cs.iter().map(|c| c.weight)).expect("positive weights");
            (p.name.as_str(), (cs, w))
        })
        .collect();

    let planter = Planter { speller: Speller::new(&lexicons), lex: &lexicons };
    let mut out = SynthCorpus {
        raw: Vec::with_capacity(size),
        clean: Vec::with_capacity(size),
        gold: Vec::new(),
        concepts: concepts.clone(),
        lexicons: lexicons.clone(),
        abbreviation_key: abbrs.key.clone(),
        planted: PlantedCounts::default(),
    };
    let background: Vec<&String> = abbrs.context.values().flatten().collect();
    let width = size.max(1).to_string().len();
    for k in 0..size {
        let id = format!("v{:0width$}", k + 1);
        let mut vr = seeded(derive_seed(seed, 1 + k as u64));
        let template = spec.templates.choose(&mut vr).expect("templates validated");
        let mut clean: Vec<Tok> = Vec::new();
        let mut raw: Vec<Tok> = Vec::new();
        let mut context: Vec<String> = Vec::new();
        let push = |v: &mut Vec<Tok>, w: &str, noisy: bool| v.push(Tok { word: w.to_string(), end: false, noisy });
        for tok in template.split_whitespace() {
            match tok {
                "." | ";" => {
                    for v in [&mut clean, &mut raw] {
                        if let Some(last) = v.last_mut() {
                            last.end = true;
                        }
                    }
                }
                "{F}" => {
                    for _ in 0..vr.gen_range(1..=4) {
                        let w = spec.filler.choose(&mut vr).expect("filler validated");
                        push(&mut clean, w, true);
                        push(&mut raw, w, true);
                    }
                }
                "{N}" => {
                    let n = vr.gen_range(1000..100_000u32).to_string();
                    push(&mut clean, &n, false);
                    push(&mut raw, &n, false);
                }
                _ if tok.starts_with('{') => {
                    let name = &tok[1..tok.len() - 1];
                    let (cs, w) = &by_type[name];
                    let c = cs[w.sample(&mut vr)];
                    out.gold.push(GoldSpan {
                        verbatim_id: id.clone(),
                        start: clean.len(),
                        n: c.phrase.split(' ').count(),
                        phrase: c.phrase.clone(),
                        concept_type: c.concept_type.clone(),
                    });
                    for w in c.phrase.split(' ') {
                        push(&mut clean, w, true);
                    }
                    match abbrs.planted.get(&c.phrase) {
                        Some(a) if vr.gen_bool(spec.noise.abbreviation) => {
                            push(&mut raw, a, false);
                            out.planted.abbreviation += 1;
                        }
                        _ => {
                            for w in c.phrase.split(' ') {
                                push(&mut raw, w, true);
                            }
                        }
                    }
                    if let Some(ctx) = abbrs.context.get(&c.phrase) {
                        context.extend(ctx.iter().filter(|_| vr.gen_bool(spec.context_rate)).cloned());
                    }
                }
                w => {
                    let noisy = !spec.stop_words.iter().any(|s| s == w);
                    push(&mut clean, w, noisy);
                    push(&mut raw, w, noisy);
                }
            }
        }
        if !background.is_empty() && vr.gen_bool(spec.context_background) {
            context.push(background[vr.gen_range(0..background.len())].clone());
        }
        if !context.is_empty() {
            for w in &context {
                push(&mut clean, w, true);
                push(&mut raw, w, true);
            }
            for v in [&mut clean, &mut raw] {
                if let Some(last) = v.last_mut() {
                    last.end = true;
                }
            }
        }
        let raw = planter.apply(raw, &spec.noise, &mut vr, &mut out.planted);
        out.clean.push((id.clone(), render(&clean)));
        out.raw.push((id, render(&raw)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ontolearn_core::corpus::{CorpusStats, Verbatim};
    use ontolearn_core::embeddings::EmbeddingTable;
    use ontolearn_core::normalize::normalize_corpus;

    fn small(noise: f64, seed: u64) -> SynthCorpus {
        let spec = SynthSpec { noise: NoiseRates::uniform(noise), ..SynthSpec::default() };
        generate(&spec, 300, seed).unwrap()
    }

    #[test]
    fn default_spec_is_valid_and_slots_are_fenced() {
        let spec = SynthSpec::default();
        spec.validate().unwrap();
        let stops: BTreeSet<&str> = spec.stop_words.iter().map(String::as_str).collect();
        for t in &spec.templates {
            let toks: Vec<&str> = t.split_whitespace().collect();
            for (i, tok) in toks.iter().enumerate() {
                let concept_slot = tok.starts_with('{') && *tok != "{F}" && *tok != "{N}";
                if !concept_slot {
                    continue;
                }
                for j in [i.wrapping_sub(1), i + 1] {
                    if let Some(nb) = toks.get(j) {
                        assert!(stops.contains(nb) || *nb == "." || *nb == ";", "{t}: {tok} next to {nb}");
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(small(0.05, 3), small(0.05, 3));
        assert_ne!(small(0.05, 3).raw, small(0.05, 4).raw);
    }

    #[test]
    fn holdout_fraction_and_gold_consistency() {
        let s = small(0.05, 1);
        let held = s.holdout();
        assert_eq!(held.len(), 90);
        for h in &held {
            assert!(!s.lexicons.ontology.contains(h));
        }
        let types: BTreeMap<&str, &str> =
            s.concepts.iter().map(|c| (c.phrase.as_str(), c.concept_type.as_str())).collect();
        let clean: BTreeMap<&str, Verbatim> =
            s.clean.iter().map(|(id, t)| (id.as_str(), Verbatim::new(id.clone(), t.clone()))).collect();
        for g in &s.gold {
            assert_eq!(types[g.phrase.as_str()], g.concept_type);
            assert_eq!(clean[g.verbatim_id.as_str()].phrase(g.start, g.n), g.phrase);
        }
        // Type pools are disjoint, so every gold word belongs to one type.
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for c in &s.concepts {
            for w in c.phrase.split(' ') {
                assert_eq!(*owner.entry(w).or_insert(&c.concept_type), c.concept_type);
            }
        }
    }

    #[test]
    fn no_nested_concepts() {
        let s = small(0.0, 2);
        for (i, a) in s.concepts.iter().enumerate() {
            for b in &s.concepts[i + 1..] {
                assert!(!nests(&a.phrase, &b.phrase), "{} / {}", a.phrase, b.phrase);
            }
        }
    }

    #[test]
    fn zero_noise_normalizes_to_itself() {
        let s = small(0.0, 5);
        assert_eq!(s.raw, s.clean);
        let corpus: Vec<Verbatim> = s.raw.iter().map(|(i, t)| Verbatim::new(i.clone(), t.clone())).collect();
        let stats = CorpusStats::build(&corpus, 1);
        let norm = normalize_corpus(&corpus, &s.lexicons, &stats, &EmbeddingTable::new(4, 1));
        assert!(norm.logs.iter().all(Vec::is_empty));
        for (a, b) in corpus.iter().zip(&norm.verbatims) {
            assert_eq!(a.norms().collect::<Vec<_>>(), b.norms().collect::<Vec<_>>());
        }
    }

    #[test]
    fn planted_noise_is_repaired() {
        let spec = SynthSpec { noise: NoiseRates { abbreviation: 0.0, ..NoiseRates::uniform(0.05) }, ..SynthSpec::default() };
        let s = generate(&spec, 400, 9).unwrap();
        assert!(s.planted.misspell > 10 && s.planted.run_on > 10 && s.planted.whitespace > 10, "{:?}", s.planted);
        let corpus: Vec<Verbatim> = s.raw.iter().map(|(i, t)| Verbatim::new(i.clone(), t.clone())).collect();
        let stats = CorpusStats::build(&corpus, 1);
        let norm = normalize_corpus(&corpus, &s.lexicons, &stats, &EmbeddingTable::new(4, 1));
        for ((_, clean), v) in s.clean.iter().zip(&norm.verbatims) {
            let want: Vec<String> = Verbatim::new("x", clean.clone()).norms().map(str::to_string).collect();
            assert_eq!(v.norms().collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let spec = SynthSpec { holdout: 1.0, ..SynthSpec::default() };
        assert!(generate(&spec, 10, 1).is_err());
        let mut spec = SynthSpec::default();
        spec.pools[0].singles.clear();
        spec.pools[0].heads.clear();
        assert!(generate(&spec, 10, 1).is_err());
        let mut spec = SynthSpec::default();
        spec.noise.misspell = 1.5;
        assert!(generate(&spec, 10, 1).is_err());
    }
}
