//! extract → vectorize → train → report over the corpora of a run config.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use svolab::classifier::{grid_search, round4, write_model, ClassifierConfig, Dataset, GridOutcome, ResultSummary};
use svolab::conllu::{Split, Treebank};
use svolab::embeddings::{load_vectors_for, read_examples, vectorize_triads, write_examples, OovReport, VectorizeOptions};
use svolab::experiment::{experiment_report, import_adjudication, ExperimentReport, ListsFile, Runner, RunnerOptions, ScoringOptions, CATCH_THRESHOLD};
use svolab::stats::{case_group_comparison, combined_redundancy, describe, CaseComparison, CorpusAccuracy, Description};
use svolab::triads::{extract_triads_excluding, filter_corpora, order_census, read_triads, write_triads, ExclusionList, ExtractionOptions, ExtractionStats, Triad};

use crate::config::{corpus_seed, split_seed, CorpusConfig, RunConfig};
use crate::Status;

const SPLITS: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

/// Where every output of a run lives, under `output_dir`.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Layout {
        Layout {
            root: cfg.output_dir.clone(),
        }
    }

    pub fn triads(&self, corpus: &str, split: Split) -> PathBuf {
        self.root.join("triads").join(corpus).join(format!("{split}.jsonl"))
    }

    pub fn examples(&self, corpus: &str, split: Split) -> PathBuf {
        self.root.join("examples").join(corpus).join(format!("{split}.bin"))
    }

    pub fn grid_results(&self, corpus: &str) -> PathBuf {
        self.root.join("grid").join(format!("{corpus}.jsonl"))
    }

    pub fn curves(&self, corpus: &str) -> PathBuf {
        self.root.join("grid").join(format!("{corpus}-curves.csv"))
    }

    pub fn manifest(&self, corpus: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{corpus}.json"))
    }

    pub fn model(&self, corpus: &str) -> PathBuf {
        self.root.join("models").join(format!("{corpus}.bin"))
    }

    pub fn extract_report(&self) -> PathBuf {
        self.root.join("extract.json")
    }

    pub fn vectorize_report(&self) -> PathBuf {
        self.root.join("vectorize.json")
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results.jsonl")
    }

    pub fn results_table(&self) -> PathBuf {
        self.root.join("results.txt")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn run_log(&self) -> PathBuf {
        self.root.join("run-log.jsonl")
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn status_of(failed: usize, total: usize) -> anyhow::Result<Status> {
    match failed {
        0 => Ok(Status::Ok),
        f if f == total => bail!("all {total} corpora failed"),
        _ => Ok(Status::Partial),
    }
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitExtract {
    pub split: Split,
    pub stats: ExtractionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusExtract {
    pub name: String,
    pub language: String,
    pub cased: bool,
    pub splits: Vec<SplitExtract>,
    /// Retained triads over all splits.
    pub triads: usize,
    pub orders: BTreeMap<String, usize>,
    pub included: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub min_triads: usize,
    pub exclude_pronouns: bool,
    pub corpora: Vec<CorpusExtract>,
}

impl ExtractReport {
    pub fn included(&self) -> impl Iterator<Item = &CorpusExtract> {
        self.corpora.iter().filter(|c| c.included)
    }
}

fn extract_corpus(
    corpus: &CorpusConfig,
    opts: &ExtractionOptions,
    exclusions: &ExclusionList,
    layout: &Layout,
) -> anyhow::Result<(Vec<SplitExtract>, Vec<Triad>)> {
    let mut splits = Vec::new();
    let mut all = Vec::new();
    for (split, path) in corpus.splits() {
        if !path.exists() {
            bail!("{}: missing {} file {}", corpus.name, split, path.display());
        }
        let mut tb = Treebank::load(&corpus.language, &corpus.name, path)
            .with_context(|| format!("{}: reading {}", corpus.name, path.display()))?;
        tb.split = split;
        let (triads, stats) = extract_triads_excluding(&tb, opts, exclusions);
        let mut buf = Vec::new();
        write_triads(&mut buf, &triads)?;
        write_file(&layout.triads(&corpus.name, split), &buf)?;
        splits.push(SplitExtract { split, stats });
        all.extend(triads);
    }
    Ok((splits, all))
}

pub fn extract(cfg: &RunConfig) -> anyhow::Result<(ExtractReport, Status)> {
    let layout = Layout::new(cfg);
    let opts = ExtractionOptions {
        exclude_pronouns: cfg.exclude_pronouns,
        surface: cfg.surface,
    };
    let exclusions = match &cfg.exclusion_list {
        Some(p) => ExclusionList::parse(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => ExclusionList::default(),
    };
    let mut corpora = Vec::new();
    let mut failed = 0;
    for c in &cfg.corpora {
        let mut row = CorpusExtract {
            name: c.name.clone(),
            language: c.language.clone(),
            cased: c.cased,
            splits: Vec::new(),
            triads: 0,
            orders: BTreeMap::new(),
            included: false,
            error: None,
        };
        match extract_corpus(c, &opts, &exclusions, &layout) {
            Ok((splits, triads)) => {
                row.triads = triads.len();
                row.orders = order_census(&triads)
                    .into_iter()
                    .map(|(o, n)| (o.to_string(), n))
                    .collect();
                row.splits = splits;
            }
            Err(e) => {
                log::error!("{e:#}");
                row.error = Some(format!("{e:#}"));
                failed += 1;
            }
        }
        corpora.push(row);
    }
    let census: Vec<(String, usize)> = corpora
        .iter()
        .filter(|c| c.error.is_none())
        .map(|c| (c.name.clone(), c.triads))
        .collect();
    let kept: BTreeSet<String> = filter_corpora(&census, cfg.min_triads).into_iter().collect();
    for c in &mut corpora {
        c.included = kept.contains(&c.name);
    }
    let report = ExtractReport {
        min_triads: cfg.min_triads,
        exclude_pronouns: cfg.exclude_pronouns,
        corpora,
    };
    write_json(&layout.extract_report(), &report)?;
    Ok((report, status_of(failed, cfg.corpora.len())?))
}

pub fn extract_summary(r: &ExtractReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "included (n>={}):", r.min_triads);
    for c in r.included() {
        let _ = writeln!(out, "  {:<24} {:>7} triads", c.name, c.triads);
    }
    let _ = writeln!(out, "excluded (n<{}):", r.min_triads);
    for c in r.corpora.iter().filter(|c| !c.included && c.error.is_none()) {
        let _ = writeln!(out, "  {:<24} {:>7} triads", c.name, c.triads);
    }
    let failed: Vec<&CorpusExtract> = r.corpora.iter().filter(|c| c.error.is_some()).collect();
    if !failed.is_empty() {
        let _ = writeln!(out, "failed:");
        for c in failed {
            let _ = writeln!(out, "  {:<24} {}", c.name, c.error.as_deref().unwrap_or(""));
        }
    }
    out
}

// -------------------------------------------------------------- vectorize

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitVectorize {
    pub split: Split,
    pub seed: u64,
    pub triads: usize,
    pub examples: usize,
    pub subject_first: usize,
    pub oov: OovReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusVectorize {
    pub name: String,
    pub dim: Option<usize>,
    pub splits: Vec<SplitVectorize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizeReport {
    pub corpora: Vec<CorpusVectorize>,
}

fn load_split_triads(layout: &Layout, corpus: &str, split: Split) -> anyhow::Result<Vec<Triad>> {
    let path = layout.triads(corpus, split);
    let f = File::open(&path).with_context(|| format!("opening {} (run extract first)", path.display()))?;
    Ok(read_triads(BufReader::new(f))?)
}

pub fn vectorize(cfg: &RunConfig) -> anyhow::Result<(VectorizeReport, Status)> {
    let layout = Layout::new(cfg);
    let extracted: ExtractReport = read_json(&layout.extract_report())?;
    let included: Vec<&CorpusExtract> = extracted.included().collect();
    if included.is_empty() {
        bail!("no corpus passed extraction with at least {} triads", extracted.min_triads);
    }

    let mut triads: BTreeMap<&str, Vec<(Split, Vec<Triad>)>> = BTreeMap::new();
    let mut errors: BTreeMap<&str, String> = BTreeMap::new();
    for c in &included {
        let loaded: anyhow::Result<Vec<_>> = SPLITS
            .iter()
            .map(|&s| Ok((s, load_split_triads(&layout, &c.name, s)?)))
            .collect();
        match loaded {
            Ok(v) => {
                triads.insert(&c.name, v);
            }
            Err(e) => {
                errors.insert(&c.name, format!("{e:#}"));
            }
        }
    }

    // one pass over each vector file, keeping only the words some corpus needs
    let mut by_language: BTreeMap<&str, Vec<&CorpusExtract>> = BTreeMap::new();
    for c in &included {
        by_language.entry(c.language.as_str()).or_default().push(c);
    }
    let mut rows = Vec::new();
    for (language, corpora) in by_language {
        let mut vocab: BTreeSet<String> = BTreeSet::new();
        for c in &corpora {
            for (_, ts) in triads.get(c.name.as_str()).into_iter().flatten() {
                for t in ts {
                    for w in t.surface(cfg.surface) {
                        vocab.insert(w.to_string());
                        if cfg.lowercase_fallback {
                            vocab.insert(w.to_lowercase());
                        }
                    }
                }
            }
        }
        let table = match cfg.vectors.get(language) {
            None => Err(anyhow!("no vector file configured for language {language}")),
            Some(p) => {
                log::info!("loading {} ({} words wanted)", p.display(), vocab.len());
                load_vectors_for(p, |w| vocab.contains(w)).with_context(|| format!("loading {}", p.display()))
            }
        };
        for c in corpora {
            let mut row = CorpusVectorize {
                name: c.name.clone(),
                dim: None,
                splits: Vec::new(),
                error: errors.get(c.name.as_str()).cloned(),
            };
            if row.error.is_none() {
                let result = table
                    .as_ref()
                    .map_err(|e| anyhow!("{e:#}"))
                    .and_then(|table| {
                        row.dim = Some(table.dim());
                        let base = corpus_seed(cfg.seed, &c.name);
                        for (split, ts) in &triads[c.name.as_str()] {
                            let seed = split_seed(base, *split);
                            let mut opts = VectorizeOptions::new(seed, cfg.surface);
                            opts.lowercase_fallback = cfg.lowercase_fallback;
                            let (examples, oov) = vectorize_triads(table, ts, &opts)?;
                            let mut buf = Vec::new();
                            write_examples(&mut buf, table.dim(), seed, &examples)?;
                            write_file(&layout.examples(&c.name, *split), &buf)?;
                            row.splits.push(SplitVectorize {
                                split: *split,
                                seed,
                                triads: ts.len(),
                                examples: examples.len(),
                                subject_first: examples.iter().filter(|e| e.first_is_subject).count(),
                                oov,
                            });
                        }
                        Ok(())
                    });
                if let Err(e) = result {
                    row.error = Some(format!("{e:#}"));
                }
            }
            if let Some(e) = &row.error {
                log::error!("{}: {e}", c.name);
            }
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let total = rows.len();
    let report = VectorizeReport { corpora: rows };
    write_json(&layout.vectorize_report(), &report)?;
    Ok((report, status_of(failed, total)?))
}

// ------------------------------------------------------------------ train

/// One row per corpus: the selected configuration and its test accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusResult {
    pub corpus: String,
    pub language: String,
    pub cased: bool,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub configs_trained: usize,
    pub selected: ResultSummary,
}

/// Settings not fixed by the method description, recorded with every run.
pub const ASSUMPTIONS: [&str; 4] = [
    "second grid learning rate is 0.0001 (written as 0001 in the method description)",
    "batch size, epoch limit and patience are local defaults, overridable in [grid]",
    "early stopping keeps the weights of the best development epoch",
    "Glorot-uniform weights, zero biases",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHash {
    pub split: Split,
    pub examples: usize,
    pub sha256: String,
}

/// What a training run saw and how it was configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus: String,
    pub run_seed: u64,
    pub corpus_seed: u64,
    pub grid: Vec<ClassifierConfig>,
    pub datasets: Vec<DatasetHash>,
    pub assumptions: Vec<String>,
}

fn load_dataset(layout: &Layout, corpus: &str, split: Split) -> anyhow::Result<(Dataset, DatasetHash)> {
    let path = layout.examples(corpus, split);
    let bytes = fs::read(&path).with_context(|| format!("opening {} (run vectorize first)", path.display()))?;
    let (_, examples) = read_examples(&bytes[..])?;
    let data = Dataset::from_examples(&examples).with_context(|| format!("{}", path.display()))?;
    let hash = DatasetHash {
        split,
        examples: data.len(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    };
    Ok((data, hash))
}

fn training_curves(outcome: &GridOutcome) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["config", "learning_rate", "hidden1", "hidden2", "epoch", "train_loss", "dev_accuracy"])?;
    for (i, o) in outcome.outcomes.iter().enumerate() {
        let Ok(r) = &o.result else { continue };
        for (e, (loss, dev)) in r.train_loss.iter().zip(&r.dev_history).enumerate() {
            w.write_record([
                i.to_string(),
                o.config.learning_rate.to_string(),
                o.config.hidden1.to_string(),
                o.config.hidden2.to_string(),
                (e + 1).to_string(),
                format!("{loss:.6}"),
                format!("{dev:.4}"),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

fn train_corpus(cfg: &RunConfig, corpus: &CorpusConfig, layout: &Layout) -> anyhow::Result<CorpusResult> {
    let (train_set, train_hash) = load_dataset(layout, &corpus.name, Split::Train)?;
    let (dev_set, dev_hash) = load_dataset(layout, &corpus.name, Split::Dev)?;
    let (test_set, test_hash) = load_dataset(layout, &corpus.name, Split::Test)?;
    let seed = corpus_seed(cfg.seed, &corpus.name);
    let grid = cfg.grid.configs(seed);
    let manifest = RunManifest {
        corpus: corpus.name.clone(),
        run_seed: cfg.seed,
        corpus_seed: seed,
        grid: grid.clone(),
        datasets: vec![train_hash, dev_hash, test_hash],
        assumptions: ASSUMPTIONS.iter().map(|a| a.to_string()).collect(),
    };
    write_json(&layout.manifest(&corpus.name), &manifest)?;
    log::info!(
        "{}: {} configs on {}/{}/{} examples",
        corpus.name,
        grid.len(),
        train_set.len(),
        dev_set.len(),
        test_set.len()
    );
    let outcome = grid_search(&grid, &train_set, &dev_set, Some(&test_set))
        .with_context(|| format!("{}: training", corpus.name))?;

    let mut detail = Vec::new();
    for (i, o) in outcome.outcomes.iter().enumerate() {
        let row = match &o.result {
            Ok(r) => ResultSummary::from_result(&corpus.name, r, i == outcome.selected),
            Err(e) => ResultSummary::failed(&corpus.name, &o.config, e),
        };
        serde_json::to_writer(&mut detail, &row)?;
        detail.push(b'\n');
    }
    write_file(&layout.grid_results(&corpus.name), &detail)?;
    write_file(&layout.curves(&corpus.name), &training_curves(&outcome)?)?;

    let best = outcome.best();
    let mut model = Vec::new();
    write_model(&mut model, &best.model)?;
    write_file(&layout.model(&corpus.name), &model)?;

    Ok(CorpusResult {
        corpus: corpus.name.clone(),
        language: corpus.language.clone(),
        cased: corpus.cased,
        n_train: train_set.len(),
        n_dev: dev_set.len(),
        n_test: test_set.len(),
        configs_trained: outcome.outcomes.len(),
        selected: ResultSummary::from_result(&corpus.name, best, true),
    })
}

/// Case-marked languages first, then by test accuracy (highest first).
pub fn sort_results(rows: &mut [CorpusResult]) {
    rows.sort_by(|a, b| {
        b.cased
            .cmp(&a.cased)
            .then(
                b.selected
                    .test_accuracy
                    .unwrap_or(0.0)
                    .total_cmp(&a.selected.test_accuracy.unwrap_or(0.0)),
            )
            .then(a.corpus.cmp(&b.corpus))
    });
}

pub fn train(cfg: &RunConfig, jobs: Option<usize>) -> anyhow::Result<(Vec<CorpusResult>, Status)> {
    let layout = Layout::new(cfg);
    let vectorized: VectorizeReport = read_json(&layout.vectorize_report())?;
    let ready: Vec<&CorpusConfig> = vectorized
        .corpora
        .iter()
        .filter(|c| c.error.is_none())
        .filter_map(|c| cfg.corpus(&c.name))
        .collect();
    if ready.is_empty() {
        bail!("no vectorized corpora to train on");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(cfg.jobs))
        .build()?;
    let mut rows = Vec::new();
    let mut failed = 0;
    for corpus in &ready {
        match pool.install(|| train_corpus(cfg, corpus, &layout)) {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::error!("{e:#}");
                failed += 1;
            }
        }
    }
    sort_results(&mut rows);
    let mut out = Vec::new();
    for r in &rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    write_file(&layout.results(), &out)?;
    write_file(&layout.results_table(), results_table(&rows).as_bytes())?;
    Ok((rows, status_of(failed, ready.len())?))
}

pub fn results_table(rows: &[CorpusResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:<24} {:>8} {:>8} {:>9} {:>5} {:>5} {:>6}",
        "case", "corpus", "test", "dev", "lr", "h1", "h2", "epochs"
    );
    for r in rows {
        let s = &r.selected;
        let _ = writeln!(
            out,
            "{:<6} {:<24} {:>8} {:>8} {:>9} {:>5} {:>5} {:>6}",
            if r.cased { "cased" } else { "none" },
            r.corpus,
            s.test_accuracy.map_or("-".into(), |a| format!("{:.4}", a)),
            s.dev_accuracy.map_or("-".into(), |a| format!("{:.4}", a)),
            s.config.learning_rate,
            s.config.hidden1,
            s.config.hidden2,
            s.epochs_run.unwrap_or(0),
        );
    }
    out
}

pub fn read_results(path: &Path) -> anyhow::Result<Vec<CorpusResult>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

// ----------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSummary {
    pub corpora: usize,
    /// Over per-corpus test accuracies (fractions).
    pub test_accuracy: Description,
    pub case: Option<CaseComparison>,
    pub case_note: Option<String>,
    pub rows: Vec<CorpusResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyEntry {
    pub label: String,
    pub unambiguous: f64,
    pub lexical: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub classifier: Option<ClassifierSummary>,
    pub human: Option<ExperimentReport>,
    pub redundancy: Vec<RedundancyEntry>,
}

pub fn classifier_summary(rows: Vec<CorpusResult>) -> anyhow::Result<Option<ClassifierSummary>> {
    let accs: Vec<(String, bool, f64)> = rows
        .iter()
        .filter_map(|r| r.selected.test_accuracy.map(|a| (r.language.clone(), r.cased, a)))
        .collect();
    if accs.is_empty() {
        return Ok(None);
    }
    let test_accuracy = describe(&accs.iter().map(|a| a.2).collect::<Vec<_>>())?;
    let input: Vec<CorpusAccuracy> = accs
        .iter()
        .map(|(language, cased, accuracy)| CorpusAccuracy {
            language: language.clone(),
            cased: *cased,
            accuracy: *accuracy,
        })
        .collect();
    let (case, case_note) = match case_group_comparison(&input) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Some(ClassifierSummary {
        corpora: accs.len(),
        test_accuracy,
        case,
        case_note,
        rows,
    }))
}

fn human_report(cfg: &RunConfig) -> anyhow::Result<Option<ExperimentReport>> {
    let Some(e) = &cfg.experiment else {
        return Ok(None);
    };
    if !e.log.exists() {
        log::warn!("no response log at {}; skipping human sessions", e.log.display());
        return Ok(None);
    }
    let lists: ListsFile = read_json(&e.lists)?;
    let runner = Runner::with_log(lists, RunnerOptions::default(), &e.log)?;
    let adjudications = match &e.adjudication {
        Some(p) => Some(import_adjudication(File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    let opts = ScoringOptions {
        catch_threshold: e.catch_threshold.unwrap_or(CATCH_THRESHOLD),
        construct_mode: e.mode,
        adjudications: adjudications.as_ref(),
        allow_partial: false,
    };
    Ok(Some(experiment_report(&runner, &opts)?))
}

pub fn report(cfg: &RunConfig) -> anyhow::Result<Report> {
    let layout = Layout::new(cfg);
    let rows = if layout.results().exists() {
        read_results(&layout.results())?
    } else {
        Vec::new()
    };
    let classifier = classifier_summary(rows)?;
    let human = human_report(cfg)?;
    let redundancy = cfg
        .redundancy
        .iter()
        .map(|r| {
            Ok(RedundancyEntry {
                label: r.label.clone(),
                unambiguous: r.unambiguous,
                lexical: r.lexical,
                combined: combined_redundancy(r.unambiguous, r.lexical)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if classifier.is_none() && human.is_none() && redundancy.is_empty() {
        bail!("no results to report: run train, or declare an experiment or redundancy inputs");
    }
    let report = Report {
        classifier,
        human,
        redundancy,
    };
    write_json(&layout.report(), &report)?;
    write_file(&layout.report_text(), report_text(&report).as_bytes())?;
    Ok(report)
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

pub fn report_text(r: &Report) -> String {
    let mut out = String::new();
    if let Some(c) = &r.classifier {
        let d = &c.test_accuracy;
        let _ = writeln!(out, "classifier test accuracy over {} corpora", c.corpora);
        let _ = writeln!(
            out,
            "  median {}  mean {} [95% CI {}, {}]  min {}  max {}",
            pct(d.median),
            pct(d.mean),
            pct(d.ci_lower),
            pct(d.ci_upper),
            pct(d.min),
            pct(d.max)
        );
        match (&c.case, &c.case_note) {
            (Some(k), _) => {
                let _ = writeln!(
                    out,
                    "  case-marked {} ({} languages) vs unmarked {} ({} languages): difference {:+.1} points",
                    pct(k.cased_mean),
                    k.cased_languages,
                    pct(k.uncased_mean),
                    k.uncased_languages,
                    100.0 * k.difference
                );
            }
            (None, Some(note)) => {
                let _ = writeln!(out, "  case comparison not available: {note}");
            }
            _ => {}
        }
        let _ = writeln!(out);
        for row in &c.rows {
            let _ = writeln!(
                out,
                "  {:<6} {:<24} {}",
                if row.cased { "cased" } else { "none" },
                row.corpus,
                row.selected.test_accuracy.map_or("-".into(), |a| pct(round4(a)))
            );
        }
        let _ = writeln!(out);
    }
    if let Some(h) = &r.human {
        let mode = serde_json::to_value(h.mode).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let _ = writeln!(out, "human sessions ({}, scoring mode: {mode})", h.task);
        let _ = writeln!(
            out,
            "  {} sessions, {} complete, {} included (catch >= {})",
            h.sessions, h.complete_sessions, h.included_sessions, h.catch_threshold
        );
        if let Some(p) = &h.participants {
            let _ = writeln!(
                out,
                "  mode {mode}: mean {:.2}% [95% CI {:.2}%, {:.2}%] over {} participants",
                p.mean, p.ci_lower, p.ci_upper, p.participants
            );
        }
        if let Some(i) = &h.items {
            let _ = writeln!(
                out,
                "  items: {} min {:.1}% max {:.1}% median {:.2}%  >80%: {:.1}%  >90%: {:.1}%",
                i.items, i.min, i.max, i.median, i.pct_above_80, i.pct_above_90
            );
        }
        if let Some(cells) = &h.animacy {
            for cell in cells {
                let _ = writeln!(
                    out,
                    "  {}: {} items, {}",
                    cell.condition.label(),
                    cell.items,
                    cell.accuracy.map_or("-".into(), |a| format!("{a:.1}%"))
                );
            }
        }
        let _ = writeln!(out);
    }
    for e in &r.redundancy {
        let _ = writeln!(
            out,
            "combined redundancy, {}: {} + {} x (1 - {}) = {}",
            e.label,
            e.unambiguous,
            e.lexical,
            e.unambiguous,
            pct(e.combined)
        );
    }
    out
}

/// Appends one line to the run log; the only place timestamps are written.
pub fn log_run(cfg: &RunConfig, command: &str, status: &str) -> anyhow::Result<()> {
    use std::io::Write;
    let path = Layout::new(cfg).run_log();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = BufWriter::new(fs::OpenOptions::new().create(true).append(true).open(&path)?);
    let line = serde_json::json!({
        "command": command,
        "status": status,
        "seed": cfg.seed,
        "finished": chrono::Utc::now().to_rfc3339(),
    });
    writeln!(f, "{line}")?;
    Ok(())
}
