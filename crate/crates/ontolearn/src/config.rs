//! Hyperparameters, read from a flat `key = value` file and overridable
//! from the command line.

use anyhow::{anyhow, bail, Context, Result};
use ontolearn_core::embeddings::SkipGramConfig;
use ontolearn_core::features::{FeatureFamily, PolysemyConfig};
use ontolearn_core::forest::{ForestConfig, Mtry};
use ontolearn_core::lexicon::ConceptType;
use ontolearn_core::rng::derive_seed;

use crate::formats::parse_types;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub types: Vec<ConceptType>,
    pub families: Vec<FeatureFamily>,
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    pub min_count: u64,
    pub learning_rate: f32,
    pub forest: ForestConfig,
    pub quota: usize,
    pub min_freq: u64,
    pub p_max: u32,
    pub sample_cap: usize,
    pub min_occurrences: usize,
    pub rounds: usize,
    pub eval_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sg = SkipGramConfig::default();
        let poly = PolysemyConfig::default();
        RunConfig {
            seed: 42,
            types: ontolearn_core::lexicon::default_types(),
            families: FeatureFamily::ALL.to_vec(),
            dim: sg.dim,
            window: sg.window,
            epochs: sg.epochs,
            negative: sg.negative,
            min_count: sg.min_count,
            learning_rate: sg.learning_rate,
            forest: ForestConfig::default(),
            quota: 50_000,
            min_freq: 5,
            p_max: poly.p_max,
            sample_cap: poly.sample_cap,
            min_occurrences: poly.min_occurrences,
            rounds: ontolearn_core::pipeline::DEFAULT_ROUNDS,
            eval_fraction: 0.3,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| anyhow!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "types",
        "families",
        "dim",
        "window",
        "epochs",
        "negative",
        "min_count",
        "learning_rate",
        "n_trees",
        "min_samples_split",
        "max_depth",
        "mtry",
        "bootstrap",
        "quota",
        "min_freq",
        "p_max",
        "sample_cap",
        "min_occurrences",
        "rounds",
        "eval_fraction",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, value)?,
            "types" => self.types = parse_types(value)?,
            "families" => {
                self.families = if value == "all" {
                    FeatureFamily::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .map(|f| FeatureFamily::parse(f.trim()).ok_or_else(|| anyhow!("unknown feature family {f:?}")))
                        .collect::<Result<_>>()?
                };
                if self.families.is_empty() {
                    bail!("at least one feature family is required");
                }
            }
            "dim" => self.dim = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "negative" => self.negative = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "n_trees" => self.forest.n_trees = parse(key, value)?,
            "min_samples_split" => self.forest.min_samples_split = parse(key, value)?,
            "max_depth" => self.forest.max_depth = if value == "none" { None } else { Some(parse(key, value)?) },
            "mtry" => {
                self.forest.mtry = match value {
                    "sqrt" => Mtry::Sqrt,
                    "all" => Mtry::All,
                    v => Mtry::Fixed(parse(key, v)?),
                }
            }
            "bootstrap" => self.forest.bootstrap = parse(key, value)?,
            "quota" => self.quota = parse(key, value)?,
            "min_freq" => self.min_freq = parse(key, value)?,
            "p_max" => self.p_max = parse(key, value)?,
            "sample_cap" => self.sample_cap = parse(key, value)?,
            "min_occurrences" => self.min_occurrences = parse(key, value)?,
            "rounds" => self.rounds = parse(key, value)?,
            "eval_fraction" => {
                self.eval_fraction = parse(key, value)?;
                if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
                    bail!("eval_fraction must lie strictly between 0 and 1");
                }
            }
            other => bail!("unknown configuration key {other:?} (known: {})", Self::KEYS.join(", ")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{source}:{}: expected `key = value`", i + 1))?;
            self.set(k, v).with_context(|| format!("{source}:{}", i + 1))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, items: &[String]) -> Result<()> {
        for item in items {
            let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got {item:?}"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn skipgram(&self, stream: u64) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.dim,
            window: self.window,
            epochs: self.epochs,
            negative: self.negative,
            min_count: self.min_count,
            learning_rate: self.learning_rate,
            seed: derive_seed(self.seed, stream),
        }
    }

    pub fn polysemy(&self) -> PolysemyConfig {
        PolysemyConfig {
            sample_cap: self.sample_cap,
            min_occurrences: self.min_occurrences,
            p_max: self.p_max,
            seed: derive_seed(self.seed, 3),
            ..PolysemyConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nn_trees = 25\nfamilies = word2vec,ontology\nmax_depth=none\n", "cfg").unwrap();
        c.apply_overrides(&["n_trees=7".into(), "mtry=all".into()]).unwrap();
        assert_eq!(c.forest.n_trees, 7);
        assert_eq!(c.forest.mtry, Mtry::All);
        assert_eq!(c.families, [FeatureFamily::Word2vec, FeatureFamily::Ontology]);
        let err = c.apply_text("bogus = 1", "cfg").unwrap_err();
        assert!(format!("{err:#}").contains("cfg:1"));
        assert!(c.set("eval_fraction", "1.5").is_err());
    }
}
