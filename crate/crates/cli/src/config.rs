use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use svolab::classifier::{canonical_order, ClassifierConfig, GRID_HIDDEN_SIZES, GRID_LEARNING_RATES};
use svolab::conllu::Split;
use svolab::experiment::ScoringMode;
use svolab::triads::{Surface, MIN_TRIADS_PER_CORPUS};

/// The run configuration, read from TOML. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_min_triads")]
    pub min_triads: usize,
    #[serde(default = "default_surface")]
    pub surface: Surface,
    /// Off for the classifier path; pronoun arguments stay in.
    #[serde(default)]
    pub exclude_pronouns: bool,
    /// Triad keys to drop, one per line.
    #[serde(default)]
    pub exclusion_list: Option<PathBuf>,
    #[serde(default)]
    pub lowercase_fallback: bool,
    /// Worker threads for training; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub grid: GridConfig,
    /// Vector file per language code.
    #[serde(default)]
    pub vectors: BTreeMap<String, PathBuf>,
    #[serde(default, rename = "corpus")]
    pub corpora: Vec<CorpusConfig>,
    #[serde(default)]
    pub redundancy: Vec<RedundancyInput>,
    pub experiment: Option<ExperimentConfig>,
}

fn default_min_triads() -> usize {
    MIN_TRIADS_PER_CORPUS
}

fn default_surface() -> Surface {
    Surface::Form
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub name: String,
    pub language: String,
    pub cased: bool,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
}

impl CorpusConfig {
    pub fn splits(&self) -> [(Split, &Path); 3] {
        [
            (Split::Train, self.train.as_path()),
            (Split::Dev, self.dev.as_path()),
            (Split::Test, self.test.as_path()),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub learning_rates: Vec<f64>,
    pub hidden_sizes: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let base = ClassifierConfig::default();
        GridConfig {
            learning_rates: GRID_LEARNING_RATES.to_vec(),
            hidden_sizes: GRID_HIDDEN_SIZES.to_vec(),
            max_epochs: base.max_epochs,
            batch_size: base.batch_size,
            patience: base.patience,
        }
    }
}

impl GridConfig {
    /// Every learning rate × first hidden size × second hidden size, in
    /// canonical order, all trained with `seed`.
    pub fn configs(&self, seed: u64) -> Vec<ClassifierConfig> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &hidden1 in &self.hidden_sizes {
                for &hidden2 in &self.hidden_sizes {
                    out.push(ClassifierConfig {
                        learning_rate,
                        hidden1,
                        hidden2,
                        max_epochs: self.max_epochs,
                        batch_size: self.batch_size,
                        patience: self.patience,
                        seed,
                    });
                }
            }
        }
        canonical_order(&mut out);
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedundancyInput {
    pub label: String,
    pub unambiguous: f64,
    pub lexical: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lists: PathBuf,
    pub log: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: ScoringMode,
    pub adjudication: Option<PathBuf>,
    pub catch_threshold: Option<usize>,
}

fn default_mode() -> ScoringMode {
    ScoringMode::Order
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.exclusion_list {
            fix(p);
        }
        self.vectors.values_mut().for_each(fix);
        for c in &mut self.corpora {
            fix(&mut c.train);
            fix(&mut c.dev);
            fix(&mut c.test);
        }
        if let Some(e) = &mut self.experiment {
            fix(&mut e.lists);
            fix(&mut e.log);
            if let Some(a) = &mut e.adjudication {
                fix(a);
            }
        }
    }

    fn check(&self) -> anyhow::Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.corpora {
            if !seen.insert(&c.name) {
                bail!("corpus {} is listed twice", c.name);
            }
            if c.name.contains(['/', '\\']) {
                bail!("corpus name {:?} cannot contain a path separator", c.name);
            }
        }
        let mut cased: BTreeMap<&str, bool> = BTreeMap::new();
        for c in &self.corpora {
            if let Some(&prev) = cased.get(c.language.as_str()) {
                if prev != c.cased {
                    bail!("language {} is marked both cased and uncased", c.language);
                }
            }
            cased.insert(&c.language, c.cased);
        }
        if self.grid.learning_rates.is_empty() || self.grid.hidden_sizes.is_empty() {
            bail!("grid needs at least one learning rate and one hidden size");
        }
        Ok(())
    }

    pub fn corpus(&self, name: &str) -> Option<&CorpusConfig> {
        self.corpora.iter().find(|c| c.name == name)
    }
}

/// Per-corpus seed: the run seed mixed with an FNV-1a hash of the corpus
/// name, so adding or reordering corpora does not change other corpora.
pub fn corpus_seed(seed: u64, corpus: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in corpus.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

pub fn split_seed(corpus_seed: u64, split: Split) -> u64 {
    corpus_seed.wrapping_add(match split {
        Split::Train => 0,
        Split::Dev => 1,
        Split::Test => 2,
        Split::Unsplit => 3,
    })
}
