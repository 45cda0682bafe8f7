//! The `svolab` command line: corpus pipeline, experiment lists, the
//! participant server and offline scoring.

pub mod config;
pub mod human;
pub mod pipeline;
pub mod remote;
pub mod server;

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use svolab::experiment::{ListOptions, Policy, Runner, RunnerOptions, ScoringMode, Task, CATCH_THRESHOLD};
use svolab::triads::{ExclusionList, Surface};

use crate::config::RunConfig;

/// How a command ended, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Some corpora failed; the others produced output.
    Partial,
}

/// An error in how the command was invoked (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn exit_code(result: &anyhow::Result<Status>) -> i32 {
    match result {
        Ok(Status::Ok) => 0,
        Ok(Status::Partial) => 1,
        Err(e) if e.is::<UsageError>() => 2,
        Err(_) => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "svolab", version, about = "Subject-verb-object redundancy lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct LogArgs {
    /// Lists file written by `svolab lists`.
    #[arg(long)]
    pub lists: PathBuf,
    /// Response log (JSON Lines).
    #[arg(long, default_value = "responses.jsonl")]
    pub log: PathBuf,
    /// Animacy annotations (TSV: item_id, subject_animate, object_animate).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract triads from every configured treebank and apply the corpus size filter.
    Extract(ConfigArg),
    /// Turn extracted triads into labelled feature vectors.
    Vectorize(ConfigArg),
    /// Run the hyperparameter grid for every vectorized corpus.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// Worker threads (default: the config's `jobs`, 0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize classifier results, human sessions and redundancy inputs.
    Report(ConfigArg),
    /// Build experiment lists from triad files.
    Lists {
        /// Critical triads (JSON Lines from `extract`).
        #[arg(long, required = true, num_args = 1..)]
        triads: Vec<PathBuf>,
        /// Catch-trial triads (JSON Lines).
        #[arg(long = "catch", required = true, num_args = 1..)]
        catch_triads: Vec<PathBuf>,
        /// Triad keys to leave out, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        keep_pronouns: bool,
        #[arg(long, default_value = "lemma")]
        surface: Surface,
        #[arg(long, default_value_t = 5)]
        n_lists: usize,
        #[arg(long, default_value_t = 20)]
        catch_per_list: usize,
        /// Give every list its own catch items instead of sharing one set.
        #[arg(long)]
        distinct_catch: bool,
        #[arg(long, default_value = "choose_subject")]
        task: Task,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Serve sessions over HTTP.
    Serve {
        #[command(flatten)]
        files: LogArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Must match the task the lists were built for.
        #[arg(long)]
        task: Option<Task>,
        /// Accept responses in any order (all trials on one page).
        #[arg(long)]
        single_page: bool,
        /// Base seed for sessions that do not send one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = CATCH_THRESHOLD)]
        catch_threshold: usize,
    },
    /// Run synthetic participants, in process or against a running server.
    Simulate {
        #[command(flatten)]
        files: LogArgs,
        #[arg(long, default_value = "oracle")]
        policy: Policy,
        #[arg(long, short, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base URL of a running `svolab serve`; the log is then the server's.
        #[arg(long)]
        url: Option<String>,
    },
    /// Write construct-sentence responses to a TSV for manual coding.
    AdjudicateExport {
        #[command(flatten)]
        files: LogArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Rescore construct-sentence sessions with a coded adjudication file.
    AdjudicateImport {
        #[command(flatten)]
        files: LogArgs,
        #[arg(long)]
        adjudication: PathBuf,
        #[arg(long, default_value_t = CATCH_THRESHOLD)]
        catch_threshold: usize,
        /// Also write the report as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Export one record per answered trial (JSON Lines) for offline analysis.
    Responses {
        #[command(flatten)]
        files: LogArgs,
        #[arg(long, default_value = "order")]
        mode: ModeArg,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Order,
    Morphology,
}

impl From<ModeArg> for ScoringMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Order => ScoringMode::Order,
            ModeArg::Morphology => ScoringMode::Morphology,
        }
    }
}

fn load_config(arg: &ConfigArg) -> anyhow::Result<RunConfig> {
    RunConfig::load(&arg.config).map_err(|e| UsageError(format!("{e:#}")).into())
}

fn finish(cfg: &RunConfig, command: &str, result: anyhow::Result<Status>) -> anyhow::Result<Status> {
    let status = match &result {
        Ok(Status::Ok) => "ok",
        Ok(Status::Partial) => "partial",
        Err(_) => "failed",
    };
    if let Err(e) = pipeline::log_run(cfg, command, status) {
        log::warn!("could not write run log: {e:#}");
    }
    result
}

pub fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Extract(arg) => {
            let cfg = load_config(&arg)?;
            let r = pipeline::extract(&cfg).map(|(report, status)| {
                print!("{}", pipeline::extract_summary(&report));
                status
            });
            finish(&cfg, "extract", r)
        }
        Command::Vectorize(arg) => {
            let cfg = load_config(&arg)?;
            let r = pipeline::vectorize(&cfg).map(|(report, status)| {
                for c in &report.corpora {
                    match &c.error {
                        Some(e) => println!("{:<24} failed: {e}", c.name),
                        None => {
                            let n: Vec<String> = c.splits.iter().map(|s| format!("{}={}", s.split, s.examples)).collect();
                            println!("{:<24} {}", c.name, n.join(" "));
                        }
                    }
                }
                status
            });
            finish(&cfg, "vectorize", r)
        }
        Command::Train { config, jobs } => {
            let cfg = load_config(&config)?;
            let r = pipeline::train(&cfg, jobs).map(|(rows, status)| {
                print!("{}", pipeline::results_table(&rows));
                status
            });
            finish(&cfg, "train", r)
        }
        Command::Report(arg) => {
            let cfg = load_config(&arg)?;
            let r = pipeline::report(&cfg).map(|report| {
                print!("{}", pipeline::report_text(&report));
                Status::Ok
            });
            finish(&cfg, "report", r)
        }
        Command::Lists {
            triads,
            catch_triads,
            exclude,
            keep_pronouns,
            surface,
            n_lists,
            catch_per_list,
            distinct_catch,
            task,
            seed,
            out,
        } => {
            let exclusions = match &exclude {
                Some(p) => Some(ExclusionList::parse(
                    &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                )),
                None => None,
            };
            let lists = human::make_lists(human::ListsRequest {
                critical: human::read_triad_files(&triads)?,
                catch: human::read_triad_files(&catch_triads)?,
                exclusions: exclusions.as_ref(),
                keep_pronouns,
                surface,
                options: ListOptions {
                    n_lists,
                    catch_per_list,
                    reuse_catch: !distinct_catch,
                    seed,
                    task,
                },
            })?;
            human::save_lists(&out, &lists)?;
            for l in &lists.lists {
                println!(
                    "list {}: {} critical, {} catch",
                    l.list_id,
                    l.critical_items.len(),
                    l.catch_items.len()
                );
            }
            Ok(Status::Ok)
        }
        Command::Serve {
            files,
            port,
            host,
            task,
            single_page,
            seed,
            catch_threshold,
        } => {
            let lists = human::load_lists(&files.lists, files.annotations.as_deref())?;
            if let Some(t) = task {
                if t != lists.task {
                    return Err(UsageError(format!("--task {t} but {} holds {} lists", files.lists.display(), lists.task)).into());
                }
            }
            let runner = Runner::with_log(lists, RunnerOptions { single_page, seed }, &files.log)?;
            let mut state = server::AppState::new(runner);
            state.catch_threshold = catch_threshold;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                log::info!("listening on http://{}", listener.local_addr()?);
                println!("listening on http://{}", listener.local_addr()?);
                server::serve(listener, Arc::new(state)).await?;
                anyhow::Ok(())
            })?;
            Ok(Status::Ok)
        }
        Command::Simulate {
            files,
            policy,
            n,
            seed,
            url,
        } => {
            let lists = human::load_lists(&files.lists, files.annotations.as_deref())?;
            let report = match url {
                Some(url) => {
                    let rt = tokio::runtime::Runtime::new()?;
                    rt.block_on(async {
                        let client = remote::Client::new(&url);
                        remote::simulate_remote(&client, &lists, lists.task, policy, seed, n).await?;
                        client.report().await
                    })?
                }
                None => human::simulate_local(lists, &files.log, policy, seed, n)?,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Status::Ok)
        }
        Command::AdjudicateExport { files, out } => {
            let lists = human::load_lists(&files.lists, files.annotations.as_deref())?;
            let n = human::adjudication_export(lists, &files.log, &out)?;
            println!("{n} rows written to {}", out.display());
            Ok(Status::Ok)
        }
        Command::AdjudicateImport {
            files,
            adjudication,
            catch_threshold,
            out,
        } => {
            let lists = human::load_lists(&files.lists, files.annotations.as_deref())?;
            let report = human::adjudication_import(lists, &files.log, &adjudication, catch_threshold)?;
            if let Some(out) = out {
                pipeline::write_json(&out, &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Status::Ok)
        }
        Command::Responses { files, mode, out } => {
            let lists = human::load_lists(&files.lists, files.annotations.as_deref())?;
            let n = human::export_responses(lists, &files.log, &out, mode.into())?;
            println!("{n} records written to {}", out.display());
            Ok(Status::Ok)
        }
    }
}
