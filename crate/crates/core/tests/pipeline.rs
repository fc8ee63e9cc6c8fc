use std::collections::{BTreeMap, BTreeSet};

use ontolearn_core::corpus::{CorpusStats, Verbatim, MAX_NGRAM};
use ontolearn_core::embeddings::{train_skipgram, EmbeddingTable, SkipGramConfig};
use ontolearn_core::evaluate::{align_spans, score_per_n, score_stage1, score_stage2};
use ontolearn_core::features::{FeatureFamily, FeatureSchema, Featurizer};
use ontolearn_core::forest::ForestConfig;
use ontolearn_core::lexicon::{default_types, AbbreviationDict, ConceptType, Dictionary, Lexicons, SeedOntology, StopNoiseLists};
use ontolearn_core::normalize::{normalize_corpus, replay_log, Step};
use ontolearn_core::pipeline::{
    build_training_set, fit_polysemy_model, generate_candidates, span_key, tag_seed_concepts, train_two_stage,
    FeatureBuilder, Inferencer, SequentialTrainer, SpanKey,
};
use ontolearn_core::pos::BaselineTagger;
use ontolearn_core::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

const PARTS: &[(&str, &str)] = &[
    ("fuel pump", "A"),
    ("engine control module", "A"),
    ("brake pad", "A"),
    ("battery", "A"),
    ("noise", "B"),
    ("leak", "B"),
    ("stall", "B"),
    ("replaced", "C"),
    ("adjusted", "C"),
];

const FILLER: &[&str] = &["customer", "says", "vehicle", "during", "morning", "drive", "after", "visit", "again", "found"];

fn lexicons() -> Lexicons {
    let mut ontology = SeedOntology::new(default_types());
    for (p, t) in PARTS {
        ontology.insert(p, ConceptType::new(*t).unwrap()).unwrap();
    }
    let mut abbreviations = AbbreviationDict::default();
    abbreviations.insert("ecm", &["engine control module"]);
    let mut words: Vec<&str> = FILLER.to_vec();
    words.extend(["the", "and", "a", "."]);
    Lexicons {
        dictionary: Dictionary::from_words(words),
        ontology,
        abbreviations,
        stop_noise: StopNoiseLists {
            stop_words: ["the", "and", "a", "."].iter().map(|s| s.to_string()).collect(),
            noise_words: BTreeSet::new(),
        },
        ..Default::default()
    }
}

/// Raw text, plus the gold concept spans of its clean form.
fn corpus() -> (Vec<Verbatim>, Vec<(SpanKey, String)>) {
    let mut rng = seeded(17);
    let mut raw = Vec::new();
    let mut gold = Vec::new();
    for i in 0..200 {
        let (a, ta) = PARTS[rng.gen_range(0..4)];
        let (b, tb) = PARTS[rng.gen_range(4..7)];
        let (c, tc) = PARTS[rng.gen_range(7..9)];
        let mut clean: Vec<&str> = Vec::new();
        let mut concepts = Vec::new();
        let mut filler = |clean: &mut Vec<&str>, max: usize| {
            for _ in 0..rng.gen_range(0..=max) {
                clean.push(FILLER[rng.gen_range(0..FILLER.len())]);
            }
        };
        for (j, (phrase, ty)) in [(a, ta), (b, tb), (c, tc), (a, ta)].into_iter().enumerate() {
            filler(&mut clean, 3);
            if j == 3 {
                clean.push("the");
            }
            // the full stop marks a boundary and takes no position
            let pos = clean.len() - usize::from(j > 1);
            concepts.push((pos, phrase, ty));
            clean.extend(phrase.split(' '));
            if j == 1 {
                filler(&mut clean, 2);
                clean.push(".");
            }
        }
        filler(&mut clean, 2);
        let id = format!("v{i}");
        for (s, phrase, ty) in concepts {
            gold.push(((id.clone(), s, phrase.split(' ').count()), ty.to_string()));
        }
        let mut words: Vec<String> = clean.iter().map(|s| s.to_string()).collect();
        // a few typos and abbreviations for the normalizer to undo
        if i % 9 == 0 {
            if let Some(w) = words.iter_mut().find(|w| w.len() > 5 && FILLER.contains(&w.as_str())) {
                w.remove(2);
            }
        }
        let mut k = 0;
        while k < words.len() {
            if i % 2 == 0 && words[k..].starts_with(&["engine".into(), "control".into(), "module".into()]) {
                words.splice(k..k + 3, ["ecm".to_string()]);
            }
            k += 1;
        }
        raw.push(Verbatim::new(id, words.join(" ")));
    }
    (raw, gold)
}

#[test]
fn normalize_train_infer_and_score() {
    let lex = lexicons();
    let (raw, gold) = corpus();
    let stats = CorpusStats::build(&raw, 1);
    let normalized = normalize_corpus(&raw, &lex, &stats, &EmbeddingTable::new(8, 1));
    assert_eq!(normalized.verbatims.len(), raw.len());
    for ((r, v), log) in raw.iter().zip(&normalized.verbatims).zip(&normalized.logs) {
        assert_eq!(r.id, v.id);
        let norms: Vec<String> = r.norms().map(str::to_string).collect();
        assert_eq!(replay_log(&norms, log).unwrap(), v.norms().map(str::to_string).collect::<Vec<_>>());
    }
    for step in [Step::Abbrev, Step::Misspell] {
        assert!(normalized.logs.iter().flatten().any(|c| c.step == step), "{step:?}");
    }
    assert!(normalized.verbatims.iter().all(|v| !v.norms().any(|w| w == "ecm")));

    let corpus = normalized.verbatims;
    let emb = train_skipgram(&corpus, &SkipGramConfig { dim: 8, min_count: 1, epochs: 3, ..Default::default() }).unwrap();
    let poly = fit_polysemy_model(&corpus, &emb, &lex.senses, &lex.stop_noise, &Default::default());
    let tagger = BaselineTagger::default();
    let featurizer = Featurizer { embeddings: &emb, polysemy: &poly, ontology: &lex.ontology };

    let set = build_training_set(&corpus, &lex.ontology, &lex.stop_noise, 300, 9);
    assert_eq!(set.omitted, [4]);
    let mut builder = FeatureBuilder::new(&corpus, featurizer, &tagger);
    let mut data = BTreeMap::new();
    for (&n, samples) in &set.samples {
        let schema = FeatureSchema::new(n, emb.dim(), &FeatureFamily::ALL).unwrap();
        data.insert(n, builder.dataset(samples.clone(), &schema).unwrap());
    }
    let (model, skipped) =
        train_two_stage(&data, &default_types(), &ForestConfig::default(), 3, lex.fingerprint(), &SequentialTrainer).unwrap();
    assert!(skipped.is_empty());
    model.validate().unwrap();

    let inf = Inferencer { model: &model, featurizer, stops: &lex.stop_noise, tagger: &tagger };
    let ex = inf.infer(&corpus).unwrap();
    let predicted: Vec<(SpanKey, String)> = ex
        .iter()
        .filter(|e| e.concept)
        .map(|e| ((e.verbatim_id.clone(), e.start, e.n), e.concept_type.clone().unwrap()))
        .collect();
    // concepts never overlap within a verbatim
    let mut by_v: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for ((v, s, n), _) in &predicted {
        by_v.entry(v).or_default().push((*s, *n));
    }
    for spans in by_v.values() {
        for (i, a) in spans.iter().enumerate() {
            assert!(spans[i + 1..].iter().all(|b| a.0 + a.1 <= b.0 || b.0 + b.1 <= a.0));
        }
    }
    let outcomes = align_spans(&predicted, &gold);
    let s1 = score_stage1(&outcomes).unwrap();
    let s2 = score_stage2(&outcomes).unwrap();
    assert!(s1.f1 > 0.8, "{s1:?}");
    assert!(s2.f1 > 0.7, "{s2:?}");
    assert_eq!(score_per_n(&outcomes, score_stage1).unwrap().keys().copied().collect::<Vec<_>>(), [1, 2, 3]);
}

fn vocab() -> Vec<&'static str> {
    vec!["fuel", "pump", "noise", "leak", "the", "engine", "control", "module", "replaced", "."]
}

fn verbatims() -> impl Strategy<Value = Vec<Verbatim>> {
    proptest::collection::vec(proptest::collection::vec(0usize..10, 0..14), 1..12).prop_map(|docs| {
        let v = vocab();
        docs.iter()
            .enumerate()
            .map(|(i, d)| Verbatim::new(format!("d{i}"), d.iter().map(|&w| v[w]).collect::<Vec<_>>().join(" ")))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn training_sets_respect_quota_and_seeds(corpus in verbatims(), quota in 1usize..6, seed in any::<u64>()) {
        let lex = lexicons();
        let set = build_training_set(&corpus, &lex.ontology, &lex.stop_noise, quota, seed);
        prop_assert_eq!(&set, &build_training_set(&corpus, &lex.ontology, &lex.stop_noise, quota, seed));
        prop_assert_eq!(set.keys().len(), set.len());
        let by_id: BTreeMap<&str, &Verbatim> = corpus.iter().map(|v| (v.id.as_str(), v)).collect();
        for (&n, list) in &set.samples {
            prop_assert!((1..=MAX_NGRAM).contains(&n));
            prop_assert!(list.iter().filter(|s| s.label.is_concept()).count() <= quota);
            prop_assert!(list.iter().filter(|s| !s.label.is_concept()).count() <= quota);
            for s in list {
                let v = by_id[s.collocate.verbatim_id.as_str()];
                prop_assert_eq!(s.collocate.n, n);
                prop_assert_eq!(v.phrase(s.collocate.start, n), s.collocate.phrase.clone());
                let tagged = tag_seed_concepts(v, &lex.ontology);
                if s.label.is_concept() {
                    prop_assert_eq!(s.label.concept_type(), lex.ontology.get(&s.collocate.phrase));
                    prop_assert!(tagged.iter().any(|t| span_key(t) == span_key(&s.collocate)));
                } else {
                    prop_assert!(tagged.iter().all(|t| !t.overlaps(s.collocate.start, n)));
                }
            }
        }
        for n in &set.omitted {
            prop_assert!(!set.samples.contains_key(n));
        }
    }

    #[test]
    fn candidates_cover_every_clean_span(corpus in verbatims()) {
        let lex = lexicons();
        for v in &corpus {
            let got: BTreeSet<(usize, usize)> =
                generate_candidates(v, &lex.stop_noise).iter().map(|c| (c.start, c.n)).collect();
            let mut want = BTreeSet::new();
            for s in 0..v.len() {
                for n in 1..=MAX_NGRAM.min(v.len() - s) {
                    let words: Vec<&str> = v.norms().skip(s).take(n).collect();
                    if v.span_in_segment(s, n) && words.iter().all(|w| !lex.stop_noise.excludes(w)) {
                        want.insert((s, n));
                    }
                }
            }
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn normalization_logs_replay(corpus in verbatims()) {
        let lex = lexicons();
        let stats = CorpusStats::build(&corpus, 1);
        let out = normalize_corpus(&corpus, &lex, &stats, &EmbeddingTable::new(4, 1));
        for ((r, v), log) in corpus.iter().zip(&out.verbatims).zip(&out.logs) {
            let norms: Vec<String> = r.norms().map(str::to_string).collect();
            prop_assert_eq!(replay_log(&norms, log), Some(v.norms().map(str::to_string).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn scores_stay_in_range(
        pred in proptest::collection::btree_map((0usize..5, 0usize..6, 1usize..4), 0usize..3, 0..20),
        gold in proptest::collection::btree_map((0usize..5, 0usize..6, 1usize..4), 0usize..3, 1..20),
    ) {
        let types = ["A", "B", "C"];
        let conv = |m: &BTreeMap<(usize, usize, usize), usize>| -> Vec<(SpanKey, String)> {
            m.iter().map(|(&(v, s, n), &t)| ((format!("v{v}"), s, n), types[t].to_string())).collect()
        };
        let (p, g) = (conv(&pred), conv(&gold));
        let outcomes = align_spans(&p, &g);
        let s1 = score_stage1(&outcomes).unwrap();
        let s2 = score_stage2(&outcomes).unwrap();
        for x in [s1.precision, s1.recall, s1.f1, s2.precision, s2.recall, s2.f1] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        let both = pred.keys().filter(|k| gold.contains_key(k)).count() as u64;
        prop_assert_eq!(s1.tp, both);
        prop_assert_eq!(s1.tp + s1.fn_, gold.len() as u64);
        let perfect = align_spans(&g, &g);
        prop_assert_eq!(score_stage1(&perfect).unwrap().f1, 1.0);
        prop_assert_eq!(score_stage2(&perfect).unwrap().f1, 1.0);
    }
}
