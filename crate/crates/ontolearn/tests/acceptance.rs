//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use ontolearn::config::RunConfig;
use ontolearn::formats;
use ontolearn::parallel::RayonTrainer;
use ontolearn::synth::{generate, SynthSpec};
use ontolearn::workflow;
use ontolearn_core::corpus::{CorpusStats, Verbatim, MAX_NGRAM};
use ontolearn_core::embeddings::{train_skipgram, EmbeddingTable};
use ontolearn_core::evaluate::{split_dataset, Ablation, AblationSplit, ELIMINATION_EPSILON};
use ontolearn_core::features::{FeatureFamily, FeatureSchema, Featurizer};
use ontolearn_core::forest::{train_forest, ForestConfig, Matrix};
use ontolearn_core::kmeans::kmeans;
use ontolearn_core::lexicon::{default_types, SeedOntology};
use ontolearn_core::normalize::{disambiguate_abbrev, AbbreviationContext, Speller, Step};
use ontolearn_core::pipeline::{
    build_pool, build_training_set, committee_disagreements, span_key, tag_seed_concepts,
    ActiveLearner, Committee, Dataset, FeatureBuilder, Label, LabelMap, LabeledSample, SampleSource, CONCEPT_CLASS,
};
use ontolearn_core::pos::BaselineTagger;
use ontolearn_core::rng::{derive_seed, seeded};
use rand::seq::SliceRandom;
use rand::Rng;

type Check = fn() -> Result<String>;

fn verbatims(rows: &[(String, String)]) -> Vec<Verbatim> {
    rows.iter().map(|(id, text)| Verbatim::new(id.as_str(), text.as_str())).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn posterior_oracle() -> Result<String> {
    let mut rng = seeded(101);
    for case in 0..100 {
        let n = rng.gen_range(2..=4);
        let v = rng.gen_range(1..=5);
        let abbr: Vec<f64> = (0..v).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..10.0) }).collect();
        let forms: Vec<Vec<f64>> = (0..n).map(|_| (0..v).map(|_| rng.gen_range(0.05..10.0)).collect()).collect();
        let raw_priors: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..50.0)).collect();
        let z: f64 = raw_priors.iter().sum();
        let ctx = |forms: Vec<Vec<f64>>| AbbreviationContext {
            abbr: "ab".into(),
            full_forms: (0..n).map(|i| format!("form {i}")).collect(),
            c_abbr: BTreeSet::new(),
            c_n: vec![BTreeSet::new(); n],
            v: (0..v).map(|i| format!("w{i}")).collect(),
            abbr_tfidf: abbr.clone(),
            form_tfidf: forms,
            priors: raw_priors.iter().map(|p| p / z).collect(),
        };
        let got = disambiguate_abbrev(&ctx(forms.clone())).posterior;

        let direct: Vec<f64> = forms
            .iter()
            .zip(&raw_priors)
            .map(|(f, p)| {
                let total: f64 = f.iter().sum();
                p / z * f.iter().zip(&abbr).map(|(x, a)| (x / total).powf(*a)).product::<f64>()
            })
            .collect();
        let dz: f64 = direct.iter().sum();
        for (g, d) in got.iter().zip(&direct) {
            ensure!(close(*g, d / dz, 1e-9), "case {case}: posterior {g} vs direct {}", d / dz);
        }
        ensure!(close(got.iter().sum(), 1.0, 1e-9), "case {case}: posteriors do not sum to 1");

        let k = rng.gen_range(0..n);
        let c = rng.gen_range(0.01..100.0);
        let mut scaled = forms.clone();
        scaled[k].iter_mut().for_each(|x| *x *= c);
        let again = disambiguate_abbrev(&ctx(scaled)).posterior;
        for (a, b) in got.iter().zip(&again) {
            ensure!(close(*a, *b, 1e-9), "case {case}: rescaling form {k} by {c} moved a posterior");
        }
    }
    Ok("100 instances".into())
}

fn synthetic_abbreviations() -> Result<String> {
    let spec = SynthSpec::default();
    let synth = generate(&spec, 10_000, 11)?;
    ensure!(synth.abbreviation_key.len() == 10, "{} abbreviations planted", synth.abbreviation_key.len());
    let raw = verbatims(&synth.raw);
    let cfg = RunConfig::default();
    let emb = workflow::raw_embeddings(&raw, &cfg)?;
    let norm = workflow::normalize(&raw, &synth.lexicons, &emb);
    let (mut total, mut right) = (0usize, 0usize);
    for c in norm.logs.iter().flatten().filter(|c| c.step == Step::Abbrev) {
        total += 1;
        right += usize::from(synth.abbreviation_key.get(&c.before) == Some(&c.after));
    }
    ensure!(total > 0, "no abbreviation was replaced");
    let rate = right as f64 / total as f64;
    ensure!(rate >= 0.9, "{right}/{total} replacements correct ({rate:.3})");
    Ok(format!("{right}/{total} replacements correct ({:.1}%), {} planted", 100.0 * rate, synth.planted.abbreviation))
}

fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + usize::from(a[i - 1] != b[j - 1]));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn cosine(emb: &EmbeddingTable, a: &str, b: &str) -> f64 {
    match (emb.get(a), emb.get(b)) {
        (Some(u), Some(v)) => {
            let dot: f64 = u.iter().zip(v).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
            let nu: f64 = u.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
            let nv: f64 = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
            if nu == 0.0 || nv == 0.0 {
                0.0
            } else {
                dot / (nu * nv)
            }
        }
        _ => 0.0,
    }
}

/// A random distance-1 edit of `w`.
fn corrupt(w: &str, rng: &mut impl Rng) -> String {
    let mut c: Vec<char> = w.chars().collect();
    let letter = (b'a' + rng.gen_range(0..26u8)) as char;
    let i = rng.gen_range(0..c.len());
    match rng.gen_range(0..3) {
        0 => {
            c.remove(i);
        }
        1 => c.insert(i, letter),
        _ => c[i] = letter,
    }
    c.into_iter().collect()
}

fn spelling_fixtures() -> Result<String> {
    let synth = generate(&SynthSpec::default(), 3_000, 12)?;
    let lex = &synth.lexicons;
    let words: BTreeSet<String> = lex.dictionary.entries.iter().chain(lex.ontology.unigrams()).cloned().collect();
    let correct = |w: &str| words.contains(w);
    let clean = verbatims(&synth.clean);
    let stop = |w: &str| lex.stop_noise.excludes(w);
    let speller = Speller::new(lex);
    let mut rng = seeded(13);

    #[derive(Clone, Copy, PartialEq)]
    enum Kind {
        Misspell,
        RunOn,
        Split,
    }
    // (verbatim index, token position, kind, planted tokens)
    let mut plan: Vec<(usize, usize, Kind, Vec<String>)> = Vec::new();
    let mut order: Vec<usize> = (0..clean.len()).collect();
    order.shuffle(&mut rng);
    let mut want = [(Kind::Misspell, 200usize), (Kind::RunOn, 50), (Kind::Split, 50)];
    for &vi in &order {
        let Some(slot) = want.iter_mut().find(|w| w.1 > 0) else { break };
        let v = &clean[vi];
        let toks: Vec<&str> = v.norms().collect();
        let i = rng.gen_range(0..toks.len());
        let w = toks[i];
        if stop(w) || !correct(w) || w.len() < 4 || !w.chars().all(|c| c.is_ascii_lowercase()) {
            continue;
        }
        let planted = match slot.0 {
            Kind::Misspell => {
                let bad = corrupt(w, &mut rng);
                let splits = (1..bad.len()).filter(|&k| correct(&bad[..k]) && correct(&bad[k..])).count();
                if bad.is_empty() || correct(&bad) || splits > 0 || lex.abbreviations.contains(&bad) {
                    continue;
                }
                vec![bad]
            }
            Kind::RunOn => {
                if i + 1 >= toks.len() || v.tokens[i].sentence_end || stop(toks[i + 1]) || !correct(toks[i + 1]) {
                    continue;
                }
                let joined = format!("{w}{}", toks[i + 1]);
                let splits: Vec<usize> = (1..joined.len()).filter(|&k| correct(&joined[..k]) && correct(&joined[k..])).collect();
                if correct(&joined) || speller.is_exempt(&joined) || splits != [w.len()] {
                    continue;
                }
                vec![joined]
            }
            Kind::Split => {
                // halves that are abbreviation keys or numbers are never merged
                let fixable = |p: &str| !correct(p) && !speller.is_exempt(p);
                let ks: Vec<usize> = (2..w.len() - 1).filter(|&k| fixable(&w[..k]) && fixable(&w[k..])).collect();
                let Some(&k) = ks.choose(&mut rng) else { continue };
                vec![w[..k].to_string(), w[k..].to_string()]
            }
        };
        plan.push((vi, i, slot.0, planted));
        slot.1 -= 1;
    }
    ensure!(want.iter().all(|w| w.1 == 0), "could not plant every fixture");

    let mut noisy: Vec<Verbatim> = clean.clone();
    for (vi, i, kind, planted) in &plan {
        let v = &clean[*vi];
        let mut toks: Vec<String> = v.tokens.iter().map(|t| t.surface.clone()).collect();
        let ends: Vec<bool> = v.tokens.iter().map(|t| t.sentence_end).collect();
        let mut out = Vec::new();
        let mut k = 0;
        while k < toks.len() {
            let end = if ends[k] { " ." } else { "" };
            if k == *i {
                match kind {
                    Kind::RunOn => {
                        let e = if ends[k + 1] { " ." } else { "" };
                        out.push(format!("{}{e}", planted[0]));
                        k += 2;
                        continue;
                    }
                    _ => out.push(format!("{}{end}", planted.join(" "))),
                }
            } else {
                out.push(format!("{}{end}", std::mem::take(&mut toks[k])));
            }
            k += 1;
        }
        noisy[*vi] = Verbatim::new(v.id.as_str(), out.join(" "));
    }
    let stats = CorpusStats::build(&noisy, 1);
    let cfg = RunConfig { min_count: 1, ..RunConfig::default() };
    let emb = train_skipgram(&noisy, &cfg.skipgram(1))?;

    let (mut unique, mut multi, mut multi_orig) = (0, 0, 0);
    for (vi, i, kind, planted) in &plan {
        let (fixed, _) = speller.repair(&noisy[*vi], &stats, &emb);
        let got: Vec<&str> = fixed.norms().collect();
        let orig: Vec<&str> = clean[*vi].norms().collect();
        match kind {
            Kind::Misspell => {
                let bad = &planted[0];
                let cands: Vec<&String> = words.iter().filter(|c| edit_distance(bad, c) == 1).collect();
                let expect = if cands.len() == 1 {
                    unique += 1;
                    ensure!(cands[0] == orig[*i], "unique candidate for {bad:?} is not the planted word");
                    cands[0].clone()
                } else {
                    multi += 1;
                    let mut best: Option<(f64, &String)> = None;
                    for c in cands {
                        let tf = stats.tf(c);
                        let s = if tf == 0 { f64::NEG_INFINITY } else { (tf as f64).ln() * cosine(&emb, bad, c) };
                        if best.is_none_or(|(b, _)| s > b) {
                            best = Some((s, c));
                        }
                    }
                    let e = best.expect("several candidates").1.clone();
                    multi_orig += usize::from(e == orig[*i]);
                    e
                };
                ensure!(got[*i] == expect, "{bad:?} repaired to {:?}, expected {expect:?}", got[*i]);
            }
            _ => ensure!(got == orig, "{:?} not restored: {:?}", planted, got.join(" ")),
        }
    }
    Ok(format!(
        "200 misspellings ({unique} unique-candidate, {multi} oracle-ranked, {multi_orig} of those the planted word), 50 run-on, 50 split words"
    ))
}

fn longest_match() -> Result<String> {
    let mut rng = seeded(21);
    let vocab: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let mut onto = SeedOntology::new(default_types());
    let mut phrases = BTreeSet::new();
    while phrases.len() < 40 {
        let n = rng.gen_range(1..=MAX_NGRAM);
        let p: Vec<&str> = (0..n).map(|_| vocab.choose(&mut rng).expect("vocab").as_str()).collect();
        phrases.insert(p.join(" "));
    }
    for p in &phrases {
        onto.insert(p, default_types()[rng.gen_range(0..3)].clone())?;
    }
    let mut tagged = 0;
    for k in 0..1000 {
        let len = rng.gen_range(1..25);
        let words: Vec<String> = (0..len)
            .map(|_| {
                let w = vocab.choose(&mut rng).expect("vocab").clone();
                if rng.gen_bool(0.15) {
                    format!("{w}.")
                } else {
                    w
                }
            })
            .collect();
        let v = Verbatim::new(format!("{k}"), words.join(" "));
        let toks: Vec<&str> = v.norms().collect();
        let ends: Vec<bool> = v.tokens.iter().map(|t| t.sentence_end).collect();

        // every occurrence of every seed phrase inside one sentence
        let mut occ: Vec<(usize, usize)> = Vec::new();
        for p in &phrases {
            let pw: Vec<&str> = p.split(' ').collect();
            for s in 0..toks.len() {
                if s + pw.len() <= toks.len()
                    && toks[s..s + pw.len()] == pw[..]
                    && !ends[s..s + pw.len() - 1].iter().any(|&e| e)
                {
                    occ.push((s, pw.len()));
                }
            }
        }
        occ.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut expect = Vec::new();
        let mut cursor = 0;
        for (s, n) in occ {
            if s >= cursor {
                expect.push((s, n));
                cursor = s + n;
            }
        }
        let got: Vec<(usize, usize)> = tag_seed_concepts(&v, &onto).iter().map(|c| (c.start, c.n)).collect();
        ensure!(got == expect, "verbatim {:?}: {got:?} vs {expect:?}", words.join(" "));
        for (i, a) in got.iter().enumerate() {
            for b in &got[i + 1..] {
                ensure!(a.0 + a.1 <= b.0 || b.0 + b.1 <= a.0, "overlapping spans {a:?} {b:?}");
            }
        }
        tagged += got.len();
    }
    Ok(format!("1000 verbatims, {tagged} spans"))
}

fn forest_sanity() -> Result<String> {
    let mut rng = seeded(31);
    let exact = ForestConfig { bootstrap: false, ..ForestConfig::default() };
    for case in 0..20 {
        let width = rng.gen_range(1..8);
        let rows = rng.gen_range(10..300);
        let classes = rng.gen_range(2..5);
        let mut seen: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        let mut x = Matrix::new(width);
        let mut y = Vec::new();
        for _ in 0..rows {
            let r: Vec<i64> = (0..width).map(|_| rng.gen_range(0..4)).collect();
            let label = *seen.entry(r.clone()).or_insert_with(|| rng.gen_range(0..classes));
            x.push_row(&r.iter().map(|&v| v as f64).collect::<Vec<_>>())?;
            y.push(label);
        }
        let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
        let f = train_forest(&x, &y, names, 0, &exact, case)?;
        for (r, &label) in x.iter_rows().zip(&y) {
            ensure!(f.predict(r)? == label, "case {case}: a training row is misclassified");
            let p = f.predict_proba(r)?;
            ensure!(close(p.iter().sum(), 1.0, 1e-9) && p.iter().all(|&v| v >= 0.0), "case {case}: {p:?}");
        }
    }

    let mut x = Matrix::new(6);
    let mut y = Vec::new();
    for _ in 0..1000 {
        let r: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        y.push(usize::from(r[0] + r[1] * r[2] > 0.0) + usize::from(r[3] > 0.5));
        x.push_row(&r)?;
    }
    let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let f = train_forest(&x, &y, names.clone(), 9, &ForestConfig::default(), 77)?;
    let text = formats::render_forest(&f);
    let back = formats::parse_forest(&text, "fixture")?;
    for r in x.iter_rows() {
        let p = f.predict_proba(r)?;
        ensure!(close(p.iter().sum(), 1.0, 1e-9), "probabilities off the simplex");
        ensure!(back.predict_proba(r)? == p, "round trip changed a prediction");
    }
    let again = train_forest(&x, &y, names, 9, &ForestConfig::default(), 77)?;
    ensure!(formats::render_forest(&again) == text, "retraining with the same seed differs");
    Ok("20 consistent datasets, 1000-row round trip".into())
}

fn kmeans_check() -> Result<String> {
    let mut rng = seeded(41);
    for run in 0..100 {
        let dim = rng.gen_range(1..5);
        let pts: Vec<Vec<f64>> = (0..rng.gen_range(2..80)).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let k = rng.gen_range(1..7);
        let km = kmeans(&pts, k, 100, &mut seeded(run));
        for w in km.objective.windows(2) {
            ensure!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "run {run}: objective rose {} -> {}", w[0], w[1]);
        }
    }
    let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 10.0], vec![10.0, 11.0]];
    let mut c = kmeans(&pts, 2, 100, &mut seeded(1)).centroids;
    c.sort_by(|a, b| a[0].total_cmp(&b[0]));
    ensure!(c == vec![vec![0.0, 0.5], vec![10.0, 10.5]], "fixture centroids {c:?}");
    Ok("100 runs, fixture exact".into())
}

fn end_to_end() -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build()?;
    pool.install(|| {
        let synth = generate(&SynthSpec::default(), 10_000, 42)?;
        let lex = &synth.lexicons;
        let cfg = RunConfig { quota: 250, ..RunConfig::default() };
        let raw = verbatims(&synth.raw);
        let raw_emb = workflow::raw_embeddings(&raw, &cfg)?;
        let norm = workflow::normalize(&raw, lex, &raw_emb).verbatims;
        let emb = workflow::final_embeddings(&norm, &cfg)?;
        let set = build_training_set(&norm, &lex.ontology, &lex.stop_noise, cfg.quota, derive_seed(cfg.seed, 4));
        let tagger = BaselineTagger::default();
        let bundle = workflow::train(&norm, lex, emb, &tagger, &set, &cfg)?;
        let test = workflow::normalize(&raw, lex, &bundle.embeddings).verbatims;
        let ex = workflow::infer(&test, lex, &bundle, &tagger)?;
        let r = workflow::evaluate(&ex, &synth.gold)?;
        let held = synth.holdout();
        let got = workflow::recovered_holdouts(&ex, &synth.gold, &held);
        let per_n: Vec<String> = r.stage1_per_n.iter().map(|(n, m)| format!("n={n}:{:.3}", m.f1)).collect();
        let recovered = got.len() as f64 / held.len().max(1) as f64;
        let detail = format!(
            "stage-1 F1 {:.3}, stage-2 macro-F1 {:.3}, held-out recovered {}/{} ({:.0}%), per-N F1 {}",
            r.stage1.f1,
            r.stage2.f1,
            got.len(),
            held.len(),
            100.0 * recovered,
            per_n.join(" ")
        );
        ensure!(r.stage1.f1 >= 0.80 && r.stage2.f1 >= 0.75 && recovered >= 0.5, "{detail}");
        ensure!(r.stage1_per_n.len() == 4, "per-N F1 missing: {detail}");
        Ok(detail)
    })
}

fn committee_rule() -> Result<String> {
    let mut rng = seeded(51);
    let schema = FeatureSchema::new(1, 3, &[FeatureFamily::Word2vec])?;
    let mut ds = Dataset::empty(schema.clone());
    for i in 0..200 {
        let r: Vec<f64> = (0..schema.width()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let concept = rng.gen_bool((0.5 + r[0] * 0.4).clamp(0.0, 1.0));
        let sample = LabeledSample {
            collocate: Verbatim::new(format!("{i}"), "w").collocate(0, 1),
            label: if concept { Label::Concept(None) } else { Label::Irrelevant },
            source: SampleSource::SeedOntology,
        };
        ds.push(sample, &r)?;
    }
    let mut splits = 0;
    for batch in 0..5 {
        let committee = Committee::train(&ds, &ForestConfig::default(), batch, &RayonTrainer)?;
        let mut rows = Matrix::new(schema.width());
        for _ in 0..500 {
            rows.push_row(&(0..schema.width()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())?;
        }
        for i in committee_disagreements(&committee, &rows)? {
            let votes = committee
                .members()
                .iter()
                .map(|m| m.predict(rows.row(i)).map(|c| usize::from(c == CONCEPT_CLASS)))
                .sum::<ontolearn_core::Result<usize>>()?;
            ensure!(votes == 4, "row {i} selected with {votes} concept votes");
            splits += 1;
        }
    }
    ensure!(splits > 0, "no 4-4 split among 2500 rows");

    let synth = generate(&SynthSpec::default(), 400, 52)?;
    let lex = &synth.lexicons;
    let corpus = verbatims(&synth.clean);
    let cfg = RunConfig { dim: 16, quota: 60, ..RunConfig::default() };
    let emb = workflow::final_embeddings(&corpus, &cfg)?;
    let poly = workflow::fit_polysemy(&corpus, &emb, lex, &cfg);
    let featurizer = Featurizer { embeddings: &emb, polysemy: &poly, ontology: &lex.ontology };
    let tagger = BaselineTagger::default();
    let set = build_training_set(&corpus, &lex.ontology, &lex.stop_noise, cfg.quota, 3);
    let data = workflow::datasets(&corpus, featurizer, &tagger, &set, &cfg)?;
    let schemas: BTreeMap<_, _> = data.iter().map(|(n, d)| (*n, d.schema.clone())).collect();
    let before = set.len();
    let mut learner = ActiveLearner::new(data, cfg.forest.clone(), 5, &RayonTrainer)?;
    let mut builder = FeatureBuilder::new(&corpus, featurizer, &tagger);
    let pool = build_pool(&corpus, &lex.stop_noise, &schemas, &learner.labeled_keys(), &mut builder)?;

    // the scripted label file answers for every candidate from the gold spans
    let gold: BTreeMap<_, _> = synth.gold.iter().map(|g| ((g.verbatim_id.clone(), g.start, g.n), g.concept_type.clone())).collect();
    let answers: Vec<LabeledSample> = pool
        .per_n
        .values()
        .flat_map(|(cs, _)| cs.iter())
        .map(|c| LabeledSample {
            label: match gold.get(&span_key(c)) {
                Some(t) => Label::parse(t, &default_types()).expect("gold type"),
                None => Label::Irrelevant,
            },
            collocate: c.clone(),
            source: SampleSource::Manual,
        })
        .collect();
    let file = formats::render_labels(&answers);
    let mut source = LabelMap::default();
    for (c, l) in formats::parse_labels(&file, "labels", &default_types())? {
        source.labels.insert(span_key(&c), l.expect("every line labeled"));
    }
    let texts: BTreeMap<&str, String> = corpus.iter().map(|v| (v.id.as_str(), v.normalized_text())).collect();
    let lookup = |id: &str| texts.get(id).cloned();
    let mut sizes = vec![before];
    for round in 0..2 {
        let report = learner.round(&pool, &lookup, &mut source, round)?;
        let keys: Vec<_> = learner.datasets.values().flat_map(|d| d.samples.iter().map(|s| span_key(&s.collocate))).collect();
        let unique: BTreeSet<_> = keys.iter().collect();
        ensure!(unique.len() == keys.len(), "round {round} duplicated a sample");
        ensure!(report.added > 0 && keys.len() > *sizes.last().expect("size"), "round {round} did not grow the set");
        sizes.push(keys.len());
    }
    Ok(format!("{splits} split rows all 4-4; training set {}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" -> ")))
}

fn ablation_tooling() -> Result<String> {
    let fams = [FeatureFamily::Word2vec, FeatureFamily::Context];
    let schema = FeatureSchema::new(1, 4, &fams)?;
    let informative = schema.block(FeatureFamily::Word2vec).expect("block").offset;
    let mut rng = seeded(61);
    let mut ds = Dataset::empty(schema.clone());
    for i in 0..400 {
        let concept = rng.gen_bool(0.5);
        let mut r: Vec<f64> = (0..schema.width()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        r[informative] = if concept { 0.6 } else { -0.6 } + rng.gen_range(-0.5..0.5);
        let sample = LabeledSample {
            collocate: Verbatim::new(format!("{i}"), "w").collocate(0, 1),
            label: if concept { Label::Concept(None) } else { Label::Irrelevant },
            source: SampleSource::SeedOntology,
        };
        ds.push(sample, &r)?;
    }
    let splits: BTreeMap<usize, AblationSplit> = BTreeMap::from([(1, split_dataset(&ds, 0.3, 62))]);
    let ab = Ablation { splits: &splits, config: ForestConfig::default(), seed: 63, trainer: &RayonTrainer };
    let rep = ab.drop_one_importance()?;
    let delta = |f| rep.deltas.iter().find(|d| d.0 == f).map(|d| d.1).expect("family scored");
    let (di, dn) = (delta(FeatureFamily::Word2vec), delta(FeatureFamily::Context));
    ensure!(di > dn, "informative {di:.4} not above noise {dn:.4}");

    let el = ab.backward_elimination()?;
    let last = el.trace.len();
    for (i, round) in el.trace.iter().enumerate() {
        let best = round.candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        match round.removed {
            Some(f) => {
                ensure!(best > round.baseline + ELIMINATION_EPSILON, "round {i} removed {f:?} without improving F1");
                let f1 = round.candidates.iter().find(|c| c.0 == f).expect("removed family scored").1;
                ensure!(f1 == best, "round {i} did not remove the best candidate");
            }
            None => {
                ensure!(i + 1 == last, "elimination continued after a stop");
                ensure!(best <= round.baseline + ELIMINATION_EPSILON, "round {i} stopped although a removal improves F1");
            }
        }
    }
    ensure!(el.kept.contains(&FeatureFamily::Word2vec), "informative family eliminated");
    Ok(format!("drop-one delta {di:.3} vs {dn:.3}; elimination kept {:?} after {last} rounds", el.kept))
}

fn main() {
    let checks: [(&str, Check, Duration); 9] = [
        ("abbreviation posterior matches direct evaluation", posterior_oracle, Duration::from_secs(1)),
        ("synthetic abbreviation disambiguation", synthetic_abbreviations, Duration::from_secs(120)),
        ("spelling, run-on and split-word repair", spelling_fixtures, Duration::from_secs(30)),
        ("longest-match seed tagging", longest_match, Duration::from_secs(10)),
        ("forest sanity", forest_sanity, Duration::from_secs(30)),
        ("k-means objective and fixture", kmeans_check, Duration::from_secs(30)),
        ("end-to-end synthetic ontology learning", end_to_end, Duration::from_secs(600)),
        ("committee 4-4 rule and active-learning driver", committee_rule, Duration::from_secs(120)),
        ("feature-family ablation", ablation_tooling, Duration::from_secs(120)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, limit) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = check();
        let took = t.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {}s limit", limit.as_secs())),
            Err(e) => (false, format!("{e:#}")),
        };
        failed += usize::from(!ok);
        println!("{} {name}: {detail} [{:.2}s]", if ok { "PASS" } else { "FAIL" }, took.as_secs_f64());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
