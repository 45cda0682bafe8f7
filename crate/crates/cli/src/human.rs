//! Lists, simulated participants, adjudication and response export.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context};
use svolab::experiment::{
    build_lists, export_for_adjudication, import_adjudication, items_from_triads, response_records,
    simulate_participants, ExperimentReport, Item, ListOptions, ListsFile, Policy, Runner, RunnerOptions,
    ScoringMode, ScoringOptions,
};
use svolab::stats::read_annotations;
use svolab::triads::{read_triads, ExclusionList, Surface, Triad};

use crate::pipeline::{read_json, write_file, write_json};

pub fn read_triad_files(paths: &[impl AsRef<Path>]) -> anyhow::Result<Vec<Triad>> {
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        out.extend(read_triads(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(out)
}

pub struct ListsRequest<'a> {
    pub critical: Vec<Triad>,
    pub catch: Vec<Triad>,
    pub exclusions: Option<&'a ExclusionList>,
    pub keep_pronouns: bool,
    pub surface: Surface,
    pub options: ListOptions,
}

/// Items for the human task: base forms, no pronoun arguments unless asked,
/// and nothing on the exclusion list.
pub fn make_lists(req: ListsRequest) -> anyhow::Result<ListsFile> {
    let keep = |t: &Triad| {
        (req.keep_pronouns || !(t.subject_is_pron || t.object_is_pron))
            && !req.exclusions.is_some_and(|x| x.contains(&t.key()))
    };
    let critical: Vec<Triad> = req.critical.into_iter().filter(|t| keep(t)).collect();
    let catch_items = items_from_triads(&req.catch, req.surface);
    let catch_ids: BTreeSet<&str> = catch_items.iter().map(|i| i.item_id.as_str()).collect();
    let critical_items: Vec<Item> = items_from_triads(&critical, req.surface)
        .into_iter()
        .filter(|i| !catch_ids.contains(i.item_id.as_str()))
        .collect();
    Ok(build_lists(&critical_items, &catch_items, &req.options)?)
}

pub fn load_lists(path: &Path, annotations: Option<&Path>) -> anyhow::Result<ListsFile> {
    let mut lists: ListsFile = read_json(path)?;
    if let Some(a) = annotations {
        let text = std::fs::read_to_string(a).with_context(|| format!("reading {}", a.display()))?;
        lists.annotate(&read_annotations(&text)?);
    }
    lists.validate()?;
    Ok(lists)
}

pub fn save_lists(path: &Path, lists: &ListsFile) -> anyhow::Result<()> {
    write_json(path, lists)
}

pub fn simulate_local(
    lists: ListsFile,
    log: &Path,
    policy: Policy,
    seed: u64,
    n: usize,
) -> anyhow::Result<ExperimentReport> {
    let mut runner = Runner::with_log(lists, RunnerOptions::default(), log)?;
    simulate_participants(&mut runner, policy, seed, n)?;
    Ok(svolab::experiment::experiment_report(&runner, &ScoringOptions::default())?)
}

pub fn adjudication_export(lists: ListsFile, log: &Path, out: &Path) -> anyhow::Result<usize> {
    if !log.exists() {
        bail!("no response log at {}", log.display());
    }
    let runner = Runner::with_log(lists, RunnerOptions::default(), log)?;
    let mut buf = Vec::new();
    let n = export_for_adjudication(&runner, &mut buf)?;
    write_file(out, &buf)?;
    Ok(n)
}

/// Rescores construct-sentence sessions with the coder's decisions.
pub fn adjudication_import(
    lists: ListsFile,
    log: &Path,
    adjudication: &Path,
    catch_threshold: usize,
) -> anyhow::Result<ExperimentReport> {
    if !log.exists() {
        bail!("no response log at {}", log.display());
    }
    let runner = Runner::with_log(lists, RunnerOptions::default(), log)?;
    let f = File::open(adjudication).with_context(|| format!("opening {}", adjudication.display()))?;
    let adj = import_adjudication(f)?;
    let opts = ScoringOptions {
        catch_threshold,
        construct_mode: ScoringMode::Morphology,
        adjudications: Some(&adj),
        allow_partial: false,
    };
    Ok(svolab::experiment::experiment_report(&runner, &opts)?)
}

/// Writes one JSON record per answered trial, for offline analysis.
pub fn export_responses(lists: ListsFile, log: &Path, out: &Path, mode: ScoringMode) -> anyhow::Result<usize> {
    if !log.exists() {
        bail!("no response log at {}", log.display());
    }
    let runner = Runner::with_log(lists, RunnerOptions::default(), log)?;
    let opts = ScoringOptions {
        construct_mode: mode,
        ..Default::default()
    };
    let records = response_records(&runner, &opts)?;
    let mut buf = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_file(out, &buf)?;
    Ok(records.len())
}
