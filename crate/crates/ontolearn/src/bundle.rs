//! A trained model bundle: both forest stages per length, the feature
//! schemas, the embeddings and the polysemy centroids, stored as a
//! directory of text files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ontolearn_core::embeddings::EmbeddingTable;
use ontolearn_core::features::{FeatureSchema, PolysemyModel};
use ontolearn_core::pipeline::TwoStageModel;

use crate::formats;
use crate::io::{read_text, write_atomic, write_dir_atomic};

pub const BUNDLE_MAGIC: &str = "ontolearn-bundle v1";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const POLYSEMY_FILE: &str = "polysemy.tsv";

pub fn forest_file(stage: u8, n: usize) -> String {
    format!("stage{stage}_n{n}.forest")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub model: TwoStageModel,
    pub embeddings: EmbeddingTable,
    pub polysemy: PolysemyModel,
    pub seed: u64,
}

impl Bundle {
    /// Manifest text. Contains no timestamps, so identical training runs
    /// produce identical manifests.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format\t{BUNDLE_MAGIC}");
        let _ = writeln!(s, "lexicon_fingerprint\t{:016x}", self.model.lexicon_fingerprint);
        let _ = writeln!(s, "seed\t{}", self.seed);
        let cov: Vec<String> = self.model.coverage().iter().map(usize::to_string).collect();
        let _ = writeln!(s, "coverage\t{}", cov.join(","));
        for (n, schema) in &self.model.schemas {
            let _ = writeln!(s, "schema\t{n}\t{}\t{:016x}", schema.describe(), schema.hash());
        }
        for (n, f) in &self.model.stage1 {
            let _ = writeln!(s, "forest\t{}\t{:016x}", forest_file(1, *n), ontolearn_core::rng::fnv1a(formats::render_forest(f).as_bytes()));
        }
        for (n, f) in &self.model.stage2 {
            let _ = writeln!(s, "forest\t{}\t{:016x}", forest_file(2, *n), ontolearn_core::rng::fnv1a(formats::render_forest(f).as_bytes()));
        }
        s
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.model.validate()?;
        write_dir_atomic(dir, |tmp| {
            for (n, f) in &self.model.stage1 {
                write_atomic(&tmp.join(forest_file(1, *n)), formats::render_forest(f).as_bytes())?;
            }
            for (n, f) in &self.model.stage2 {
                write_atomic(&tmp.join(forest_file(2, *n)), formats::render_forest(f).as_bytes())?;
            }
            write_atomic(&tmp.join(EMBEDDINGS_FILE), formats::render_embeddings(&self.embeddings).as_bytes())?;
            write_atomic(&tmp.join(POLYSEMY_FILE), formats::render_polysemy(&self.polysemy).as_bytes())?;
            write_atomic(&tmp.join(MANIFEST_FILE), self.manifest().as_bytes())
        })
    }

    pub fn load(dir: &Path) -> Result<Bundle> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = read_text(&manifest_path)?;
        let src = manifest_path.display().to_string();
        let mut fingerprint = None;
        let mut seed = None;
        let mut schemas = BTreeMap::new();
        let mut format_ok = false;
        for (i, line) in manifest.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || anyhow!("{src}:{}: malformed manifest line", i + 1);
            match f.as_slice() {
                ["format", v] => format_ok = *v == BUNDLE_MAGIC,
                ["lexicon_fingerprint", v] => fingerprint = Some(u64::from_str_radix(v, 16).map_err(|_| bad())?),
                ["seed", v] => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
                ["coverage", _] | ["forest", _, _] => {}
                ["schema", n, desc, hash] => {
                    let n: usize = n.parse().map_err(|_| bad())?;
                    let schema = FeatureSchema::parse(desc)?;
                    if format!("{:016x}", schema.hash()) != *hash {
                        bail!("{src}:{}: schema hash does not match its description", i + 1);
                    }
                    schemas.insert(n, schema);
                }
                _ => return Err(bad()),
            }
        }
        if !format_ok {
            bail!("{src}: not an {BUNDLE_MAGIC} manifest");
        }
        let mut model = TwoStageModel {
            stage1: BTreeMap::new(),
            stage2: BTreeMap::new(),
            schemas,
            lexicon_fingerprint: fingerprint.ok_or_else(|| anyhow!("{src}: missing lexicon_fingerprint"))?,
        };
        for &n in model.schemas.keys() {
            for stage in [1u8, 2] {
                let p = dir.join(forest_file(stage, n));
                let f = formats::parse_forest(&read_text(&p)?, &p.display().to_string())?;
                if stage == 1 {
                    model.stage1.insert(n, f);
                } else {
                    model.stage2.insert(n, f);
                }
            }
        }
        model.validate().with_context(|| format!("loading {}", dir.display()))?;
        let embeddings = formats::load_embeddings(&dir.join(EMBEDDINGS_FILE))?;
        let poly_path = dir.join(POLYSEMY_FILE);
        let polysemy = formats::parse_polysemy(&read_text(&poly_path)?, &poly_path.display().to_string())?;
        Ok(Bundle {
            model,
            embeddings,
            polysemy,
            seed: seed.ok_or_else(|| anyhow!("{src}: missing seed"))?,
        })
    }
}
